use super::moments::MomentRecord;
use crate::model::Mode;
use crate::quadrature::InferenceError;
use crate::stats::Estimate;

/// Reid products for one unordered pair at one time, both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprRecord {
    pub t: f64,
    pub xi: Option<f64>,
    pub j: Mode,
    pub k: Mode,
    /// `EPR_jk`: mode `j` inferred from mode `k`.
    pub forward: Estimate,
    /// `EPR_kj`.
    pub reverse: Estimate,
}

pub fn epr_timeseries(moments: &[MomentRecord], j: Mode, k: Mode) -> Result<Vec<EprRecord>, InferenceError> {
    moments
        .iter()
        .map(|rec| {
            Ok(EprRecord {
                t: rec.t,
                xi: rec.xi,
                j,
                k,
                forward: rec.epr(j, k)?,
                reverse: rec.epr(k, j)?,
            })
        })
        .collect()
}
