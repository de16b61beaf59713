"""Exception hierarchy.

Every error carries a module-qualified ``code`` so the CLI can emit a
structured report without inspecting exception types.
"""


class FellerError(Exception):
    code = "fellerx.error"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"code": self.code, "message": str(self)}
        if self.details:
            out["details"] = self.details
        return out


# scale-speed
class NonPositiveDiffusion(FellerError):
    code = "scale_speed.non_positive_diffusion"


class DivergentQuadrature(FellerError):
    code = "scale_speed.divergent_quadrature"


class NonMonotone(FellerError):
    code = "scale_speed.non_monotone"


class IndeterminateDivergence(FellerError):
    code = "scale_speed.indeterminate_divergence"


# eigen
class NoConvergence(FellerError):
    code = "eigen.no_convergence"


class DegenerateBracket(FellerError):
    code = "eigen.degenerate_bracket"


class ZeroWronskian(FellerError):
    code = "eigen.zero_wronskian"


# resolvent-min
class OutOfDomain(FellerError):
    code = "resolvent_min.out_of_domain"


class UnboundedIntegrand(FellerError):
    code = "resolvent_min.unbounded_integrand"


class NotInDomain(FellerError):
    code = "resolvent_min.not_in_domain"


# feller-bc
class InvalidBoundaryData(FellerError):
    code = "feller_bc.invalid_boundary_data"


class MissingEndpointData(FellerError):
    code = "feller_bc.missing_endpoint_data"


class InaccessibleBoundary(FellerError):
    code = "feller_bc.inaccessible_boundary"


class SingularSystem(FellerError):
    code = "feller_bc.singular_system"


class CaseMismatch(FellerError):
    code = "feller_bc.case_mismatch"


# excursion-sim
class InvalidEps(FellerError):
    code = "excursion_sim.invalid_eps"


class HorizonTooSmall(FellerError):
    code = "excursion_sim.horizon_too_small"


# grid-oracle
class GridTooCoarse(FellerError):
    code = "grid_oracle.grid_too_coarse"


# cli
class ConfigError(FellerError):
    code = "cli.config_error"

    def __init__(self, message="", line=None, **details):
        if line is not None:
            message = f"line {line}: {message}"
            details["line"] = line
        super().__init__(message, **details)
