//! Result emission: the results CSV with an auditable parameter header, and
//! the companion plot-data file.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use specmmd::kernels::bandwidth_grid;
use specmmd::testing::LambdaGrid;

use crate::config::{kernel_name, regularizer_name, ExperimentConfig, Method, Timing};
use crate::experiments::PointResult;

fn format_grid(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Echo of every effective parameter, including the derived grids, as '#'
/// comment lines above the CSV header.
pub fn parameter_header(config: &ExperimentConfig) -> Result<String> {
    let lambdas = LambdaGrid::new(config.lambda_l, config.lambda_u)?;
    let multipliers = bandwidth_grid(1.0, config.w_l, config.w_u)?;
    let (n, m, d) = config.effective_dims();
    let mut out = String::new();
    out.push_str(&format!(
        "# experiment={} method={} kernel={} regularizer={}\n",
        config.experiment.name(),
        config.method.name(),
        kernel_name(config.kernel),
        regularizer_name(config.regularizer),
    ));
    out.push_str(&format!(
        "# N={} M={} s={} d={} reps={} alpha={} w={} w_tilde={} B={}\n",
        n,
        m,
        config.effective_s(),
        d,
        config.reps,
        config.alpha,
        config.w,
        config.w_tilde,
        config.b,
    ));
    out.push_str(&format!(
        "# lambda_grid=[{}] cardinality={}\n",
        format_grid(lambdas.values()),
        lambdas.len()
    ));
    out.push_str(&format!(
        "# bandwidth_multipliers=[{}] cardinality={} (scaled by the per-replication median heuristic)\n",
        format_grid(multipliers.values()),
        multipliers.len()
    ));
    out.push_str(&format!(
        "# grid_size={} effective_level_per_config={}\n",
        lambdas.len() * multipliers.len(),
        config.w * config.alpha / (lambdas.len() * multipliers.len()) as f64
    ));
    // thread count deliberately not echoed: results are identical across
    // worker counts, and the header must be too
    out.push_str(&format!(
        "# master_seed={} timing={} pre_shuffle={}\n",
        config.master_seed,
        match config.timing {
            Timing::Wall => "wall",
            Timing::None => "none",
        },
        config.pre_shuffle,
    ));
    if config.method != Method::Spectral {
        out.push_str("# note: baseline method ignores the regularization grid\n");
    }
    Ok(out)
}

/// Path of the companion plot-data file: `<stem>_plot.csv`.
pub fn plot_path(out_path: &Path) -> PathBuf {
    let stem = out_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    out_path.with_file_name(format!("{stem}_plot.csv"))
}

/// Write the results CSV (schema: experiment,d,sweep_param,sweep_value,reps,
/// rejections,power,ci_lo,ci_hi,seconds) plus the plot-data companion
/// (x,y,y_lo,y_hi).
pub fn emit_results(
    results: &[PointResult],
    config: &ExperimentConfig,
    out_path: &Path,
) -> Result<()> {
    let mut csv = String::new();
    csv.push_str(&parameter_header(config)?);
    csv.push_str("experiment,d,sweep_param,sweep_value,reps,rejections,power,ci_lo,ci_hi,seconds\n");
    let (_, _, d) = config.effective_dims();
    for r in results {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.3}\n",
            config.experiment.name(),
            d,
            config.experiment.sweep_param(),
            r.sweep_value,
            r.reps,
            r.rejections,
            r.power,
            r.ci_lo,
            r.ci_hi,
            r.mean_seconds,
        ));
    }
    let mut f = std::fs::File::create(out_path)
        .with_context(|| format!("creating {}", out_path.display()))?;
    f.write_all(csv.as_bytes())?;

    let mut plot = String::from("x,y,y_lo,y_hi\n");
    for r in results {
        plot.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            r.sweep_value, r.power, r.ci_lo, r.ci_hi
        ));
    }
    let plot_file = plot_path(out_path);
    let mut f = std::fs::File::create(&plot_file)
        .with_context(|| format!("creating {}", plot_file.display()))?;
    f.write_all(plot.as_bytes())?;
    Ok(())
}

/// Human-readable table printed after a run.
pub fn print_results(results: &[PointResult], config: &ExperimentConfig) {
    println!(
        "{:<14} {:>10} {:>6} {:>10} {:>8} {:>8} {:>8} {:>9}",
        "sweep_param", "value", "reps", "rejections", "power", "ci_lo", "ci_hi", "sec/rep"
    );
    for r in results {
        println!(
            "{:<14} {:>10} {:>6} {:>10} {:>8.4} {:>8.4} {:>8.4} {:>9.3}",
            config.experiment.sweep_param(),
            r.sweep_value,
            r.reps,
            r.rejections,
            r.power,
            r.ci_lo,
            r.ci_hi,
            r.mean_seconds,
        );
    }
}
