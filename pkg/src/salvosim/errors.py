"""Exception types shared across the simulator."""

from __future__ import annotations


class SalvoError(Exception):
    """Base class for all errors raised by this package."""


class TopologyError(SalvoError, ValueError):
    """Malformed or structurally invalid graph input.

    Raised for bad edge lists (self-loops, duplicates, out-of-range
    indices), for spectral constructions that require a rooted spanning
    tree or strong connectivity, and for gain floors evaluated on
    invalid spectra.
    """


class DegenerateGeometryError(SalvoError, ValueError):
    """Engagement geometry that has no defined kinematics.

    Coincident pursuer/target positions, or a non-positive pursuer
    speed in the flight-path equations.
    """


class SingularTgoError(SalvoError, ArithmeticError):
    """Time-to-go denominator (or control effectiveness) vanished.

    The closed-form time-to-go divides by V_theta^2 + V_r^2 + 2*c*V_r;
    the guidance command additionally divides by B, which is zero on an
    exact collision course (V_theta = 0).
    """


class ConfigError(SalvoError, ValueError):
    """Scenario document failed validation.

    Collects every violation found, not just the first; the individual
    messages are available in ``issues``.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


class SimulationDiverged(SalvoError, RuntimeError):
    """Integration produced a non-finite value.

    Carries the simulation time, the offending pursuer (1-based id, or
    0 for the target) and the name of the first non-finite term.
    """

    def __init__(self, t, pursuer, term):
        self.t = t
        self.pursuer = pursuer
        self.term = term
        agent = "target" if pursuer == 0 else f"P{pursuer}"
        super().__init__(f"non-finite {term} for {agent} at t={t:.6f} s")
