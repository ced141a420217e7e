//! Evaluation metrics and tabular run reports.

use ndarray::{s, Array2, ArrayView2};
use ndarray_linalg::{JobSvd, SVDDC};

use crate::error::{Result, SpodError};
use crate::solver::{residual, Decomposition, SpodProblem};

/// `||Q - sum_k T^k(Q^k) - E||_F / ||Q||_F`.
pub fn relative_reconstruction_error(
    problem: &SpodProblem,
    decomposition: &Decomposition,
) -> Result<f64> {
    let r = residual(problem, &decomposition.frames, &decomposition.noise)?;
    let q = problem.snapshot().values();
    let q_norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(if q_norm > 0.0 { r_norm / q_norm } else { r_norm })
}

/// Relative error of the best rank-`r` approximation (truncated SVD) of `q`.
pub fn pod_truncation_error(q: ArrayView2<'_, f64>, r: usize) -> Result<f64> {
    let (m, n) = q.dim();
    let p = m.min(n);
    if r == 0 || r > p {
        return Err(SpodError::Domain(format!(
            "truncation rank must lie in [1, {p}], got {r}"
        )));
    }
    let (u, sigma, vt) = q
        .to_owned()
        .svddc(JobSvd::Some)
        .map_err(|e| SpodError::Numerical(format!("SVD failed: {e}")))?;
    let u = u.ok_or_else(|| SpodError::Numerical("SVD returned no left vectors".into()))?;
    let vt = vt.ok_or_else(|| SpodError::Numerical("SVD returned no right vectors".into()))?;
    let mut scaled = u.slice(s![.., ..r]).to_owned();
    for (j, col) in scaled.columns_mut().into_iter().enumerate() {
        let mut col = col;
        col.mapv_inplace(|v| v * sigma[j]);
    }
    let truncated: Array2<f64> = scaled.dot(&vt.slice(s![..r, ..]));
    let q_norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = &q.to_owned() - &truncated;
    let err = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(if q_norm > 0.0 { err / q_norm } else { err })
}

/// One row of the method-comparison table.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub benchmark: String,
    pub method: String,
    pub relative_error: f64,
    pub ranks: Vec<usize>,
    pub iterations: usize,
    pub cpu_seconds: f64,
    pub converged: bool,
}

fn ranks_str(ranks: &[usize]) -> String {
    let inner: Vec<String> = ranks.iter().map(|r| r.to_string()).collect();
    format!("({})", inner.join(","))
}

/// Aligned plain-text table with one row per (benchmark, method).
pub fn build_table(reports: &[RunReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(SpodError::Domain("no reports to tabulate".into()));
    }
    let header = [
        "benchmark",
        "method",
        "rel_error",
        "ranks",
        "iterations",
        "cpu_seconds",
        "converged",
    ];
    let mut rows: Vec<[String; 7]> = Vec::with_capacity(reports.len());
    for r in reports {
        rows.push([
            r.benchmark.clone(),
            r.method.clone(),
            format!("{:.6e}", r.relative_error),
            ranks_str(&r.ranks),
            r.iterations.to_string(),
            format!("{:.3}", r.cpu_seconds),
            r.converged.to_string(),
        ]);
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let fmt_row = |cells: &[String], widths: &[usize]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let header_cells: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    out.push_str(&fmt_row(&header_cells, &widths));
    out.push('\n');
    for row in &rows {
        out.push_str(&fmt_row(row, &widths));
        out.push('\n');
    }
    Ok(out)
}

/// Comma-separated variant of [`build_table`], same row order.
pub fn build_csv(reports: &[RunReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(SpodError::Domain("no reports to tabulate".into()));
    }
    let mut out =
        String::from("benchmark,method,rel_error,ranks,iterations,cpu_seconds,converged\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{:.6e},{},{},{:.3},{}\n",
            r.benchmark,
            r.method,
            r.relative_error,
            ranks_str(&r.ranks).replace(',', ";"),
            r.iterations,
            r.cpu_seconds,
            r.converged
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pod_error_is_zero_at_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = Array2::from_shape_fn((8, 6), |_| rng.gen::<f64>());
        let err = pod_truncation_error(q.view(), 6).unwrap();
        assert!(err <= 1e-12);
        assert!(pod_truncation_error(q.view(), 0).is_err());
        assert!(pod_truncation_error(q.view(), 7).is_err());
    }

    #[test]
    fn pod_error_exact_on_low_rank_matrix() {
        // rank-3 synthetic matrix
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Array2::from_shape_fn((10, 3), |_| rng.gen::<f64>());
        let b = Array2::from_shape_fn((3, 7), |_| rng.gen::<f64>());
        let q = a.dot(&b);
        assert!(pod_truncation_error(q.view(), 3).unwrap() <= 1e-12);
    }

    #[test]
    fn pod_error_matches_spectral_tail_and_decreases() {
        use ndarray_linalg::{JobSvd, SVDDC};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = Array2::from_shape_fn((12, 9), |_| rng.gen::<f64>() - 0.5);
        let (_, sigma, _) = q.to_owned().svddc(JobSvd::None).unwrap();
        let q_norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut prev = f64::INFINITY;
        for r in 1..=9 {
            let err = pod_truncation_error(q.view(), r).unwrap();
            let tail: f64 = sigma.iter().skip(r).map(|s| s * s).sum::<f64>().sqrt() / q_norm;
            assert!((err - tail).abs() <= 1e-10, "r = {r}: {err} vs {tail}");
            assert!(err <= prev + 1e-12);
            prev = err;
        }
    }

    #[test]
    fn table_formats_single_report() {
        let report = RunReport {
            benchmark: "multilinear".into(),
            method: "alm".into(),
            relative_error: 1.9e-5,
            ranks: vec![4, 2],
            iterations: 104,
            cpu_seconds: 9.0,
            converged: true,
        };
        let table = build_table(std::slice::from_ref(&report)).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].contains("(4,2)"));
        let csv = build_csv(&[report]).unwrap();
        assert!(csv.lines().nth(1).unwrap().contains("(4;2)"));
        assert!(build_table(&[]).is_err());
    }
}
