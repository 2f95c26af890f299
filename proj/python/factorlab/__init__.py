"""Futures factor research engine: factor DSL, decile backtests, metrics and IPCA."""

from ._core import (  # noqa: F401
    IpcaError,
    LookaheadError,
    NoSignals,
    Panel,
    PanelError,
    ParseError,
    alpha_regression,
    annualized_return,
    backtest_multi,
    backtest_single,
    builtin_catalog,
    check_lookahead,
    decile_weights,
    evaluate,
    fit_ipca,
    generate_panel,
    ic_series,
    load_panel,
    load_panel_file,
    max_drawdown,
    parse,
    sharpe_ratio,
    slice,
)

__version__ = "0.1.0"
