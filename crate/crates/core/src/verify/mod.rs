//! Inequality checks over models, test functions and schedules, with machine-readable reports.

pub mod algebraic;
pub mod analytic;
pub mod result;
pub mod schedule;
pub mod spectral;
pub mod suite;

pub use result::{verdict, CaseRow, CheckResult, Verdict};
pub use schedule::{builtin_schedules, check_ratio_increasing, check_schedule_admissible, Schedule, ScheduleKind};
pub use suite::{run_and_write, run_suite, CheckSpec, Report, SuiteConfig};
