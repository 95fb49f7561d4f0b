use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdrf::raster::save_gray_normalized;
use pdrf::scenes::{make_dataset, read_manifest, write_manifest, BlurKind, Preset, SceneSpec};
use pdrf::trainer::{
    evaluate_heldout, loss_log_csv, render_deblurred, train_with, variance_map, Model, TrainConfig,
};
use pdrf::{Error, Result};

#[derive(Parser)]
#[command(name = "pdrf", version, about = "Sharp radiance fields from blurry images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic blurry dataset.
    MakeScene(MakeScene),
    /// Train a model on a dataset.
    Train(Train),
    /// Render deblurred images from a checkpoint.
    Render(Render),
    /// Score held-out views (PSNR / SSIM).
    Eval(Eval),
    /// Write the blur-offset variance map of one training view.
    VizBlur(VizBlur),
}

#[derive(Args)]
struct MakeScene {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "spheres")]
    preset: Preset,
    #[arg(long, default_value = "defocus")]
    blur: BlurKind,
    #[arg(long, default_value_t = 8)]
    views: usize,
    #[arg(long, default_value_t = 64)]
    res: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Train {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 1 is bit-reproducible, 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    /// Skip the refinement pass of the blur estimator.
    #[arg(long)]
    single_stage: bool,
    /// Central rays only, no blur model.
    #[arg(long)]
    no_blur_model: bool,
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct Render {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output directory, one PNG per view.
    #[arg(long)]
    out: PathBuf,
    /// Render this view (by file name) instead of every held-out view.
    #[arg(long)]
    view: Option<String>,
}

#[derive(Args)]
struct Eval {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VizBlur {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Index into the training views.
    #[arg(long)]
    view: usize,
    #[arg(long)]
    out: PathBuf,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn make_scene(a: &MakeScene) -> Result<()> {
    let spec = SceneSpec {
        preset: a.preset,
        blur: a.blur,
        views: a.views,
        resolution: a.res,
        seed: a.seed,
    };
    let ds = make_dataset(&spec);
    write_manifest(&ds, &a.out)?;
    println!(
        "wrote {} training and {} held-out views to {}",
        ds.training().count(),
        ds.heldout().count(),
        a.out.display()
    );
    Ok(())
}

fn effective_config(a: &Train) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    if a.single_stage {
        cfg.single_stage = true;
    }
    if a.no_blur_model {
        cfg.blur_model = false;
    }
    if let Some(k) = a.kernel {
        cfg.kernel_size = k;
    }
    if let Some(n) = a.iterations {
        cfg.iterations = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: &Train) -> Result<()> {
    let cfg = effective_config(a)?;
    let ds = read_manifest(&a.data)?;
    let toml = cfg.to_toml();
    println!("# effective config\n{toml}");
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(sibling(&a.out, ".config.toml"), &toml)?;
    let every = cfg.checkpoint_every;
    let (model, log) = train_with(&ds, &cfg, |p| {
        let it = p.record.iteration + 1;
        if !a.quiet && (it % 100 == 0 || it == cfg.iterations) {
            println!(
                "iter {it:>6}  crr {:.5}  fvr {:.5}  tv {:.3e}  total {:.5}",
                p.record.l_crr, p.record.l_fvr, p.record.l_tv, p.record.l_total
            );
        }
        if every > 0 && it % every == 0 {
            p.model.save(&a.out)?;
        }
        Ok(())
    })?;
    model.save(&a.out)?;
    fs::write(sibling(&a.out, ".log.csv"), loss_log_csv(&log))?;
    println!("saved {}", a.out.display());
    Ok(())
}

fn render(a: &Render) -> Result<()> {
    let model = Model::load(&a.ckpt)?;
    let ds = read_manifest(&a.data)?;
    let views: Vec<_> = match &a.view {
        Some(name) => {
            let v = ds
                .views
                .iter()
                .find(|v| &v.name == name)
                .ok_or_else(|| Error::Config(format!("no view named `{name}`")))?;
            vec![v]
        }
        None => ds.heldout().collect(),
    };
    fs::create_dir_all(&a.out)?;
    for v in views {
        model.geometry.check_camera(&v.camera)?;
        let img = render_deblurred(&model, &v.camera)?;
        let path = a.out.join(&v.name);
        img.save_png8(&path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn eval(a: &Eval) -> Result<()> {
    let model = Model::load(&a.ckpt)?;
    let ds = read_manifest(&a.data)?;
    let report = evaluate_heldout(&model, &ds)?;
    print!("{}", report.to_table());
    fs::write(&a.out, report.to_csv())?;
    Ok(())
}

fn viz_blur(a: &VizBlur) -> Result<()> {
    let model = Model::load(&a.ckpt)?;
    let ds = read_manifest(&a.data)?;
    let cams = ds.training_cameras();
    if let Some(c) = cams.first() {
        model.geometry.check_camera(c)?;
    }
    let map = variance_map(&model, &cams, a.view)?;
    let c = &cams[a.view];
    let (lo, hi) = save_gray_normalized(&map, c.width, c.height, &a.out)?;
    fs::write(sibling(&a.out, ".txt"), format!("min {lo:e}\nmax {hi:e}\n"))?;
    println!("variance range [{lo:e}, {hi:e}], wrote {}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::MakeScene(a) => make_scene(a),
        Command::Train(a) => train(a),
        Command::Render(a) => render(a),
        Command::Eval(a) => eval(a),
        Command::VizBlur(a) => viz_blur(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
