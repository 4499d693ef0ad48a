use crate::error::{Error, Result};

/// Per-task majority over voter predictions. Ties resolve to the positive class.
pub fn plurality_vote(preds: &[(bool, bool)]) -> Result<(bool, bool)> {
    if preds.is_empty() {
        return Err(Error::Contract(
            "plurality vote needs at least one voter".into(),
        ));
    }
    let n = preds.len();
    let request = preds.iter().filter(|p| p.0).count();
    let complaint = preds.iter().filter(|p| p.1).count();
    Ok((2 * request >= n, 2 * complaint >= n))
}
