//! Studies built from the lower modules. Every result embeds the inputs
//! needed to rerun it.

mod nazarov;
mod scan;
mod smoothmax;

pub use nazarov::{nazarov_check, nazarov_scan, NazarovResult, NazarovRow};
pub use scan::{rate_scan, FamilySpec, PRule, ScanBoundParams, ScanResult, ScanRow, ScanSpec};
pub use smoothmax::{smooth_max, smoothmax_check, SmoothmaxCell, SmoothmaxResult};

pub use crate::report::{emit_report, OutputFormat};
