//! Command-line surface: `train`, `eval`, `infer`, `analyze`, `gradcheck`.
//!
//! Exit codes: 0 on success, 1 on runtime or data errors (missing files,
//! bad checkpoints, failed checks), 2 on usage errors.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io;
use crate::model::{estimate_flops, model_cost, ModuleKind, Tcsr};
use crate::tensor::{Dtype, Scalar, Tensor};
use crate::train::{
    evaluate_pair, train, AdamState, EvalResult, EvalRow, TrainConfig,
};
use crate::verify::run_gradcheck;

#[derive(Parser)]
#[command(
    name = "tcsr",
    version,
    about = "Neighborhood-attention super-resolution: train, evaluate, infer, analyze, verify"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model on a folder of PNG images.
    Train {
        /// Config file (key=value).
        #[arg(long)]
        config: PathBuf,
        /// Directory of HR training images.
        #[arg(long)]
        data: PathBuf,
        /// Output checkpoint path; the loss curve goes to <out>.loss.csv.
        #[arg(long)]
        out: PathBuf,
        /// Override the step count from the config.
        #[arg(long)]
        steps: Option<u64>,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Train in f64 instead of the default f32.
        #[arg(long = "f64")]
        use_f64: bool,
    },
    /// Evaluate a checkpoint on a folder of HR images (Y-channel PSNR/SSIM).
    Eval {
        #[arg(long, required_unless_present = "identity")]
        ckpt: Option<PathBuf>,
        /// Directory of HR reference images.
        #[arg(long)]
        hr: PathBuf,
        /// Optional directory of pre-made LR inputs (paired by sorted name);
        /// generated by bicubic downscaling when absent.
        #[arg(long)]
        lr: Option<PathBuf>,
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=4))]
        scale: u8,
        /// Score the HR images against themselves (metric sanity check).
        #[arg(long)]
        identity: bool,
        /// Also write the result table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Super-resolve one PNG.
    Infer {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=4))]
        scale: u8,
        /// Process in tiles of this many LR pixels (memory-constrained runs).
        #[arg(long)]
        tile: Option<usize>,
    },
    /// Print parameter counts and FLOP estimates for a config.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Feature-map extent as HxW.
        #[arg(long, default_value = "64x64")]
        hw: String,
        /// Also write the itemized table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check hand-written gradients against finite differences.
    Gradcheck {
        /// Check a single operation (default: all).
        #[arg(long)]
        op: Option<String>,
    },
}

/// Parse `argv` and run; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args())
}

pub fn run_from<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::Train {
            config,
            data,
            out,
            steps,
            seed,
            use_f64,
        } => {
            let mut cfg = io::load_config_file(&config)?;
            if let Some(s) = steps {
                cfg.train.steps = s;
            }
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if use_f64 {
                run_train::<f64>(&cfg.model, &cfg.train, &data, &out)
            } else {
                run_train::<f32>(&cfg.model, &cfg.train, &data, &out)
            }
        }
        Cmd::Eval {
            ckpt,
            hr,
            lr,
            scale,
            identity,
            csv,
        } => run_eval(ckpt.as_deref(), &hr, lr.as_deref(), scale as usize, identity, csv.as_deref()),
        Cmd::Infer {
            ckpt,
            input,
            output,
            scale,
            tile,
        } => match io::peek_dtype(&ckpt)? {
            Some(Dtype::F64) => run_infer::<f64>(&ckpt, &input, &output, scale as usize, tile),
            _ => run_infer::<f32>(&ckpt, &input, &output, scale as usize, tile),
        },
        Cmd::Analyze { config, hw, csv } => run_analyze(&config, &hw, csv.as_deref()),
        Cmd::Gradcheck { op } => {
            let reports = run_gradcheck(op.as_deref(), &[1, 2, 3])?;
            let mut all_pass = true;
            for r in &reports {
                print!("{}", r.to_text());
                all_pass &= r.pass();
            }
            if all_pass {
                println!("gradcheck: {} reports, all passed", reports.len());
                Ok(0)
            } else {
                println!("gradcheck: FAILURES above");
                Ok(1)
            }
        }
    }
}

fn run_train<T: Scalar>(
    model_cfg: &crate::model::ModelConfig,
    train_cfg: &TrainConfig,
    data: &Path,
    out: &Path,
) -> Result<i32> {
    let images: Vec<Tensor<T>> = io::load_rgb_dir::<T>(data)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    println!(
        "training {} (scale {}) on {} images, {} steps, dtype {}",
        model_cfg.variant,
        model_cfg.scale,
        images.len(),
        train_cfg.steps,
        T::DTYPE
    );
    let mut model = Tcsr::<T>::init(model_cfg.clone(), train_cfg.seed)?;
    let mut state = AdamState::for_model(&model);
    let report = train(&mut model, &mut state, train_cfg, &images, |step, m, s| {
        io::save_model(m, Some(s), out)?;
        println!("step {step}: checkpoint written to {}", out.display());
        Ok(())
    })?;
    let curve_path = PathBuf::from(format!("{}.loss.csv", out.display()));
    std::fs::write(&curve_path, report.to_csv()).map_err(|e| Error::io(&curve_path, e))?;
    if let Some(loss) = report.final_loss() {
        println!("final loss {loss:.6}; curve written to {}", curve_path.display());
    }
    Ok(0)
}

fn run_eval(
    ckpt: Option<&Path>,
    hr_dir: &Path,
    lr_dir: Option<&Path>,
    scale: usize,
    identity: bool,
    csv: Option<&Path>,
) -> Result<i32> {
    let result = if identity {
        let hr_images = io::load_rgb_dir::<f64>(hr_dir)?;
        let mut rows = Vec::new();
        for (name, hr) in &hr_images {
            let hr = crate::train::modcrop(hr, scale)?;
            let (p, s) = evaluate_pair(&hr, &hr, scale)?;
            rows.push(EvalRow {
                name: name.clone(),
                psnr_db: p,
                ssim: s,
            });
        }
        EvalResult { rows, scale }
    } else {
        let ckpt = ckpt.expect("clap enforces --ckpt unless --identity");
        match io::peek_dtype(ckpt)? {
            Some(Dtype::F64) => eval_with_model::<f64>(ckpt, hr_dir, lr_dir, scale)?,
            _ => eval_with_model::<f32>(ckpt, hr_dir, lr_dir, scale)?,
        }
    };
    print!("{}", result.to_text());
    if let Some(path) = csv {
        std::fs::write(path, result.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(0)
}

fn eval_with_model<T: Scalar>(
    ckpt: &Path,
    hr_dir: &Path,
    lr_dir: Option<&Path>,
    scale: usize,
) -> Result<EvalResult> {
    let (model, _) = io::load_model::<T>(ckpt)?;
    if model.config.scale != scale {
        return Err(Error::Config(format!(
            "checkpoint was trained for scale {}, --scale says {scale}",
            model.config.scale
        )));
    }
    let hr_images = io::load_rgb_dir::<T>(hr_dir)?;
    let lr_images = match lr_dir {
        Some(dir) => {
            let lr = io::load_rgb_dir::<T>(dir)?;
            if lr.len() != hr_images.len() {
                return Err(Error::Config(format!(
                    "{} LR images but {} HR images",
                    lr.len(),
                    hr_images.len()
                )));
            }
            Some(lr.into_iter().map(|(_, t)| t).collect::<Vec<_>>())
        }
        None => None,
    };
    crate::train::evaluate_model(&model, &hr_images, lr_images.as_deref())
}

fn run_infer<T: Scalar>(
    ckpt: &Path,
    input: &Path,
    output: &Path,
    scale: usize,
    tile: Option<usize>,
) -> Result<i32> {
    let (model, _) = io::load_model::<T>(ckpt)?;
    if model.config.scale != scale {
        return Err(Error::Config(format!(
            "checkpoint was trained for scale {}, --scale says {scale}",
            model.config.scale
        )));
    }
    let lr = io::read_rgb_png::<T>(input)?;
    let sr = match tile {
        Some(t) => model.super_resolve_tiled(&lr, t)?,
        None => model.super_resolve(&lr)?,
    };
    if !sr.all_finite() {
        return Err(Error::NonFinite("super-resolved output".into()));
    }
    io::write_rgb_png(output, &sr)?;
    let s = sr.shape4()?;
    println!("{} -> {} ({}x{})", input.display(), output.display(), s.w, s.h);
    Ok(0)
}

fn run_analyze(config: &Path, hw: &str, csv: Option<&Path>) -> Result<i32> {
    let cfg = io::load_config_file(config)?;
    let (h, w) = parse_hw(hw)?;
    let report = model_cost(&cfg.model, h, w)?;
    println!(
        "model {} at scale {}, feature maps {h}x{w}",
        cfg.model.variant, cfg.model.scale
    );
    print!("{}", report.to_text());

    let (c, k) = (cfg.model.channels, cfg.model.kernel);
    let na = estimate_flops(ModuleKind::Na { channels: c, kernel: k }, 1, 1);
    let swin = estimate_flops(ModuleKind::Swin { channels: c, kernel: k }, 1, 1);
    let conv_k = estimate_flops(ModuleKind::Conv { channels: c, kernel: k }, 1, 1);
    let conv3 = estimate_flops(ModuleKind::Conv { channels: c, kernel: 3 }, 1, 1);
    println!("\nper-pixel module cost at C={c} (multiply-accumulates):");
    println!("  conv K={k:<2}       {conv_k:>12}");
    println!("  swin K={k:<2}       {swin:>12}");
    println!("  na   K={k:<2}       {na:>12}");
    println!("  conv K=3        {conv3:>12}");
    println!(
        "  na(K={k}) / conv(K=3) = {:.3}",
        na as f64 / conv3 as f64
    );
    if let Some(path) = csv {
        std::fs::write(path, report.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(0)
}

fn parse_hw(hw: &str) -> Result<(usize, usize)> {
    let (h, w) = hw
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("--hw expects HxW, got '{hw}'")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("--hw expects HxW, got '{hw}'")))
    };
    Ok((parse(h)?, parse(w)?))
}
