//! A small forest-density sweep written as CSV plus SVG charts.
//!
//!     cargo run --release --example parameter_sweep [out_dir]

use std::path::PathBuf;

use aos_thermal::eval::{mean_rmse, write_csv_file, Method, Regime, SaType};
use aos_thermal::plot::{density_chart, method_heatmap};
use aos_thermal::{run_sweep, Error, SweepConfig};

fn main() -> aos_thermal::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("aos-sweep"));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let sweep = SweepConfig {
        densities_tpha: vec![220.0, 585.0, 950.0],
        seeds: (0..3).collect(),
        image_size: 64,
        ..SweepConfig::default().fast()
    };
    let report = run_sweep(&sweep)?;
    write_csv_file(&report.records, out.join("results.csv"))?;
    for (path, svg) in [
        ("rmse_full.svg", density_chart(&report.records, Regime::Full)),
        ("heatmap_full.svg", method_heatmap(&report.records, Regime::Full)),
    ] {
        std::fs::write(out.join(path), svg).map_err(|e| Error::io(out.join(path), e))?;
    }

    println!("{:>8} {:>8} {:>10} {:>10}", "t/ha", "single", "integral", "corrected");
    for &d in &sweep.densities_tpha {
        let m = |method: Method, sa: SaType| {
            mean_rmse(&report.records, |r| {
                r.density_tpha == d && r.regime == Regime::Full && r.method == method && r.sa_type == sa
            })
            .unwrap_or(f64::NAN)
        };
        println!(
            "{d:>8.0} {:>8.2} {:>10.2} {:>10.2}",
            m(Method::Single, SaType::None),
            m(Method::Integral, SaType::TwoD),
            m(Method::Corrected, SaType::TwoD)
        );
    }
    println!("{} records, {} failures, written to {}", report.records.len(), report.failures.len(), out.display());
    Ok(())
}
