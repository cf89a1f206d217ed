"""Mean-field control solvers and a causal-transport ladder.

Thin re-export of the compiled module. Installed wheels carry the
extension inside this package; in a build tree it sits on sys.path.
"""

try:
    from ._mfcx import (
        ConfigError,
        lift,
        liquidate,
        lq,
        martingale_check,
        probe_cost,
        solve,
        transport_ladder,
    )
except ImportError:
    from _mfcx import (
        ConfigError,
        lift,
        liquidate,
        lq,
        martingale_check,
        probe_cost,
        solve,
        transport_ladder,
    )

__all__ = [
    "ConfigError",
    "lift",
    "liquidate",
    "lq",
    "martingale_check",
    "probe_cost",
    "solve",
    "transport_ladder",
]

__version__ = "0.1.0"
