"""Exception hierarchy. Every error names the module that raised it."""


class CuspBoundsError(Exception):
    module = "cuspbounds"

    def __str__(self) -> str:
        return f"[{self.module}] {super().__str__()}"


class ConfigError(CuspBoundsError, ValueError):
    module = "config-core"


class SingularEvaluation(CuspBoundsError, ZeroDivisionError):
    module = "config-core"


class InvalidSelector(CuspBoundsError, ValueError):
    module = "singular-geometry"


class NonSmoothPoint(CuspBoundsError, ArithmeticError):
    module = "cluster-calculus"


class StepTooLarge(CuspBoundsError, ValueError):
    module = "cluster-calculus"


class OrderTooHigh(CuspBoundsError, ValueError):
    module = "cluster-calculus"


class InvalidVariant(CuspBoundsError, ValueError):
    module = "jastrow-fields"


class OnSingularSet(CuspBoundsError, ValueError):
    module = "jastrow-fields"


class UnsupportedN(CuspBoundsError, ValueError):
    module = "unity-partition"


class CenterElectronAtOrigin(CuspBoundsError, ValueError):
    module = "unity-partition"


class EmptySupportSample(CuspBoundsError, RuntimeError):
    module = "unity-partition"


class ResidualTooLarge(CuspBoundsError, RuntimeError):
    module = "eigenstate-oracles"


class BudgetExhausted(CuspBoundsError, RuntimeError):
    module = "estimate-verifier"


class CenterOnSingularSet(CuspBoundsError, ValueError):
    module = "estimate-verifier"


class InvalidAlpha(CuspBoundsError, ValueError):
    module = "estimate-verifier"


class DegenerateRay(CuspBoundsError, ValueError):
    module = "estimate-verifier"


class MethodUnavailable(CuspBoundsError, ValueError):
    module = "density-engine"


class CenterAtNucleus(CuspBoundsError, ValueError):
    module = "density-engine"
