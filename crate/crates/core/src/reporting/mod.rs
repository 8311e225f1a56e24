//! Evaluation histories and the reports derived from them.

mod history;
mod report;

pub use history::{
    read_history, HistoryError, HistoryHeader, HistoryRecord, HistorySink, JsonlHistory,
    LoadedHistory, MemoryHistory, Phase, HISTORY_FORMAT,
};
pub use report::{
    build_report, improvement_pct, GroupContribution, ReportError, SessionReport, WindowStat,
    WINDOW,
};
