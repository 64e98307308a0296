"""Joint count distributions under the available evaluation strategies."""

from ..errors import ConfigError, UnsupportedRepresentation
from ..sources import CommonDiagonal, CommonNumber, Independent, ReferencedPhase
from .distribution import JointDistribution, grid_extent, resolve_axes, same_grid
from .fock import fock_joint, generating_function_fock, reduce_thinned
from .incoherent import incoherent_joint
from .meanfield import meanfield_joint, phase_average_joint
from .oracle import brute_force_oracle, fock_density
from .radial import radial_phase_average_joint

ENGINES = ("meanfield", "phase", "radial", "fock", "auto")

__all__ = [
    "ENGINES",
    "JointDistribution",
    "brute_force_oracle",
    "choose_engine",
    "compute_joint",
    "fock_density",
    "fock_joint",
    "generating_function_fock",
    "grid_extent",
    "incoherent_joint",
    "meanfield_joint",
    "phase_average_joint",
    "radial_phase_average_joint",
    "reduce_thinned",
    "resolve_axes",
    "same_grid",
]


def choose_engine(sources) -> str:
    """Cheapest exact-or-controlled engine for ``sources``.

    Coherent-amplitude pairs go to the phase average, other P-representable
    pairs to the radial engine, and anything with a number-state component to
    the Fock engine.
    """
    if isinstance(sources, (CommonNumber, CommonDiagonal)):
        return "fock"
    if isinstance(sources, ReferencedPhase):
        return "radial"
    if not isinstance(sources, Independent):
        raise UnsupportedRepresentation(f"no engine for {type(sources).__name__}")
    a, b = sources.a, sources.b
    if a.has_radial and b.has_radial:
        if a.radial().kind == "delta" and b.radial().kind == "delta":
            return "phase"
        return "radial"
    if a.has_diagonal and b.has_diagonal:
        return "fock"
    raise UnsupportedRepresentation("sources share no representation any engine can use")


def compute_joint(
    array,
    sources,
    engine="auto",
    grid=None,
    fixed=None,
    tol=1e-10,
    delta=None,
    allow_expensive=False,
    reduce_binomial=True,
) -> JointDistribution:
    """Dispatch to one engine.

    ``delta`` is only used by the mean-field engine, ``allow_expensive`` and
    ``reduce_binomial`` only by the Fock engine.
    """
    if engine not in ENGINES:
        raise ConfigError(f"unknown engine {engine!r}; choose from {', '.join(ENGINES)}")
    if engine == "auto":
        engine = choose_engine(sources)
    if engine == "meanfield":
        if delta is None:
            if not isinstance(sources, ReferencedPhase):
                raise ConfigError("the mean-field engine needs a fixed relative phase")
            delta = sources.delta
        return meanfield_joint(array, sources.means(), delta, grid, fixed)
    if engine == "phase":
        return phase_average_joint(array, sources, grid, fixed, tol=tol)
    if engine == "radial":
        return radial_phase_average_joint(array, sources, grid, fixed, tol=tol)
    return fock_joint(array, sources, grid, fixed, allow_expensive=allow_expensive, reduce_binomial=reduce_binomial)
