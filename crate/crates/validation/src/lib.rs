//! Shared reporting for the acceptance experiments in `tests/acceptance.rs`.

use std::io::Write;

use sa_ea::CellSummary;

/// Writes one `PASS`/`FAIL` line for a criterion to stderr and returns
/// `pass`. The handle is used directly so the line survives test capture.
pub fn report(id: u32, title: &str, pass: bool, detail: &str) -> bool {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id:>2} [{status}] {title}: {detail}");
    pass
}

/// The summary row for `(function, n, s, F)`.
pub fn cell<'a>(
    summaries: &'a [CellSummary],
    function: &str,
    n: usize,
    s: f64,
    f: f64,
) -> &'a CellSummary {
    summaries
        .iter()
        .find(|c| c.function == function && c.n == n && c.s == s && c.f == f)
        .unwrap_or_else(|| panic!("no summary for {function} n={n} s={s} F={f}"))
}

/// `true` if the sequence never decreases.
pub fn non_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] <= w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_decreasing_accepts_plateaus() {
        assert!(non_decreasing(&[0.0, 0.0, 0.5, 1.0]));
        assert!(!non_decreasing(&[0.0, 1.0, 0.9]));
        assert!(non_decreasing(&[]));
    }
}
