use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use levelset::harness::config::{
    bpdn_config, convergence_config, echo_bpdn, echo_convergence, echo_image, echo_lowrank, image_config, lowrank_config,
};
use levelset::harness::{run_bpdn_study, run_convergence_study, run_image_study, run_lowrank_study, RunReport, StudyOutput};
use levelset::Result;

/// Level-set BPDN and low-rank recovery studies on synthetic data.
///
/// Every study writes report.csv (one row per method with SNR in dB,
/// defined as 20 log10(|truth| / |truth - estimate|) and capped at 300),
/// one trace_<method>.csv per successful row, and config_echo.txt holding
/// the resolved configuration.
///
/// Exit status: 0 on success, 2 if some rows failed (marked in the report),
/// 1 on configuration or I/O errors.
#[derive(Parser)]
#[command(name = "levelset", version)]
struct Cli {
    #[command(subcommand)]
    study: Study,
}

#[derive(Subcommand)]
enum Study {
    /// Spike-train basis pursuit denoise with l0/l1/l2/linf residual balls.
    Bpdn(Common),
    /// Objective decay of the splitting algorithms at fixed eta.
    Convergence(Common),
    /// Factorized low-rank interpolation and denoising.
    Lowrank(Common),
    /// Interpolation and denoising of an image that is sparse under the 2-D DCT.
    Image(Common),
}

#[derive(Args)]
struct Common {
    /// key = value settings; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

impl Common {
    fn config_text(&self) -> Result<String> {
        match &self.config {
            Some(p) => fs::read_to_string(p).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", p.display())).into()),
            None => Ok(String::new()),
        }
    }
}

struct Outputs {
    report: RunReport,
    echo: String,
    /// `(label, csv)` per trace.
    traces: Vec<(String, Vec<u8>)>,
}

fn run(study: &Study) -> Result<(Outputs, &Path)> {
    match study {
        Study::Bpdn(c) => {
            let mut cfg = bpdn_config(&c.config_text()?)?;
            if let Some(s) = c.seed {
                cfg.spike.seed = s;
            }
            Ok((solver_outputs(run_bpdn_study(&cfg)?, echo_bpdn(&cfg))?, &c.out_dir))
        }
        Study::Convergence(c) => {
            let mut cfg = convergence_config(&c.config_text()?)?;
            if let Some(s) = c.seed {
                cfg.spike.seed = s;
            }
            Ok((solver_outputs(run_convergence_study(&cfg)?, echo_convergence(&cfg))?, &c.out_dir))
        }
        Study::Image(c) => {
            let mut cfg = image_config(&c.config_text()?)?;
            if let Some(s) = c.seed {
                cfg.image.seed = s;
            }
            Ok((solver_outputs(run_image_study(&cfg)?, echo_image(&cfg))?, &c.out_dir))
        }
        Study::Lowrank(c) => {
            let mut cfg = lowrank_config(&c.config_text()?)?;
            if let Some(s) = c.seed {
                cfg.experiment.seed = s;
            }
            let out = run_lowrank_study(&cfg)?;
            let traces = out
                .traces
                .iter()
                .map(|(l, t)| csv_of(l, |w| t.write_csv(w, true)))
                .collect::<Result<_>>()?;
            let echo = echo_lowrank(&cfg);
            Ok((
                Outputs {
                    report: out.report,
                    echo,
                    traces,
                },
                &c.out_dir,
            ))
        }
    }
}

fn solver_outputs(out: StudyOutput, echo: String) -> Result<Outputs> {
    let traces = out
        .traces
        .iter()
        .map(|(l, t)| csv_of(l, |w| t.write_csv(w, true)))
        .collect::<Result<_>>()?;
    Ok(Outputs {
        report: out.report,
        echo,
        traces,
    })
}

fn csv_of(label: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<(String, Vec<u8>)> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok((label.to_string(), buf))
}

fn save(out: &Outputs, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut report = Vec::new();
    out.report.write_csv(&mut report, true)?;
    fs::write(dir.join("report.csv"), report)?;
    fs::write(dir.join("config_echo.txt"), &out.echo)?;
    for (label, csv) in &out.traces {
        fs::write(dir.join(format!("trace_{label}.csv")), csv)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (out, dir) = match run(&cli.study) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = save(&out, dir) {
        eprintln!("error writing results to {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    for row in &out.report.rows {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        let status = if row.is_ok() { "ok" } else { "FAILED" };
        println!(
            "{:<12} {:<5} {:<7} snr {:>8} dB  w {:>8} dB  {:.2}s",
            row.method,
            row.ball,
            status,
            fmt(row.snr_db),
            fmt(row.snr_w_db),
            row.seconds
        );
    }
    if out.report.failures() > 0 {
        for row in out.report.rows.iter().filter(|r| !r.is_ok()) {
            eprintln!("{} {}: {:?}", row.method, row.ball, row.status);
        }
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
