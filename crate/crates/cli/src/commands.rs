use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chaosnet::ann::{self, AnnModel};
use chaosnet::codegen::{generate_bundle, CodegenRequest};
use chaosnet::config::ProjectConfig;
use chaosnet::dse::{self, CandidateDesign, CoefficientTable, Selection};
use chaosnet::integrator::{build_dataset, integrate, Dataset};
use chaosnet::oscillator::{self, extract_bits, BitStream};
use chaosnet::randtest::{self, RandTestError};
use chaosnet::TOOL_VERSION;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::failure::{invalid, Classify, Failure};

pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub force: bool,
    pub jobs: Option<usize>,
}

pub struct Context {
    pub config: ProjectConfig,
    pub force: bool,
}

impl Context {
    /// Loads, applies command-line overrides, validates.
    pub fn load(path: Option<&Path>, o: Overrides) -> Result<Self, Failure> {
        let mut config = match path {
            Some(p) => {
                let text =
                    fs::read_to_string(p).invalid(format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).invalid(format!("parsing config {}", p.display()))?
            }
            None => ProjectConfig::default(),
        };
        if let Some(seed) = o.seed {
            config.train.seed = seed;
        }
        if let Some(out) = o.out {
            config.paths.out_dir = out;
        }
        config.validate().invalid("configuration")?;
        if let Some(jobs) = o.jobs {
            if jobs == 0 {
                return invalid("--jobs must be at least 1");
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .runtime("starting worker pool")?;
        }
        Ok(Self {
            config,
            force: o.force,
        })
    }

    fn path(&self, p: &Path) -> PathBuf {
        self.config.paths.resolve(p)
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> Result<(), Failure> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).runtime(format!("creating {}", dir.display()))?;
        }
        fs::write(path, bytes).runtime(format!("writing {}", path.display()))
    }

    /// `<out>/<command>.manifest.json` with the effective config echoed.
    fn manifest(&self, command: &str, details: serde_json::Value) -> Result<(), Failure> {
        let doc = json!({
            "tool_version": TOOL_VERSION,
            "command": command,
            "config": self.config,
            "result": details,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        text.push('\n');
        self.write(
            &self.path(Path::new(&format!("{command}.manifest.json"))),
            text.as_bytes(),
        )
    }

    fn load_model(&self) -> Result<AnnModel, Failure> {
        let path = self.path(&self.config.paths.model);
        let text =
            fs::read_to_string(&path).invalid(format!("reading model {}", path.display()))?;
        AnnModel::from_json(&text).invalid(format!("loading model {}", path.display()))
    }

    /// Oscillator seed in normalized coordinates.
    fn seed(&self, model: &AnnModel) -> Result<Vec<f32>, Failure> {
        let x = self
            .config
            .run
            .seed
            .as_ref()
            .unwrap_or(&self.config.system.x0);
        if x.len() != model.arch.input {
            return invalid(format!(
                "seed has {} values, model {} expects {}",
                x.len(),
                model.arch,
                model.arch.input
            ));
        }
        Ok(x.iter()
            .zip(&model.norm_stats)
            .map(|(v, s)| s.normalize(*v))
            .collect())
    }

    fn coefficients(&self) -> Result<CoefficientTable, Failure> {
        match &self.config.dse.coefficients {
            None => Ok(CoefficientTable::builtin()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .invalid(format!("reading coefficients {}", p.display()))?;
                CoefficientTable::from_json(&text)
                    .invalid(format!("loading coefficients {}", p.display()))
            }
        }
    }
}

fn hex_bits(values: &[f32]) -> Vec<String> {
    values
        .iter()
        .map(|v| format!("{:08x}", v.to_bits()))
        .collect()
}

pub fn dataset(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let sys = cfg.system().invalid("system")?;
    let s = &cfg.system;
    log::info!(
        "integrating {} for {} steps at dt={}",
        s.name,
        s.steps,
        s.dt
    );
    let traj = integrate(&sys, &s.x0, s.dt, s.steps).runtime("integration")?;
    let ds = build_dataset(&traj, cfg.dataset.split_ratio, cfg.dataset.normalize)
        .runtime("building dataset")?;
    let mut bytes = Vec::new();
    ds.write_to(&mut bytes).runtime("encoding dataset")?;
    let path = ctx.path(&cfg.paths.dataset);
    ctx.write(&path, &bytes)?;

    println!(
        "pairs: {} ({} train / {} test)",
        ds.len(),
        ds.train_count,
        ds.test_count()
    );
    for (d, st) in ds.norm_stats.iter().enumerate() {
        println!("x{}: min {} max {}", d + 1, st.min, st.max);
    }
    println!("wrote {}", path.display());
    let stats: Vec<_> = ds
        .norm_stats
        .iter()
        .map(|s| json!({ "min": s.min, "max": s.max }))
        .collect();
    ctx.manifest(
        "dataset",
        json!({
            "file": path,
            "pairs": ds.len(),
            "train": ds.train_count,
            "test": ds.test_count(),
            "norm_stats": stats,
        }),
    )
}

pub fn train(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let arch = cfg.arch().invalid("architecture")?;
    let path = ctx.path(&cfg.paths.dataset);
    let file = fs::File::open(&path).invalid(format!("opening dataset {}", path.display()))?;
    let ds = Dataset::read_from(std::io::BufReader::new(file))
        .invalid(format!("reading dataset {}", path.display()))?;
    if ds.dim != arch.input {
        return invalid(format!(
            "architecture {arch} does not fit {}-dimensional dataset",
            ds.dim
        ));
    }
    let tc = cfg.train_config();
    log::info!(
        "training {arch} {} for {} epochs",
        cfg.train.activation,
        tc.epochs
    );
    let out = ann::train(&ds, arch, cfg.train.activation, &tc).runtime("training")?;
    let model_path = ctx.path(&cfg.paths.model);
    ctx.write(&model_path, out.model.to_json().as_bytes())?;

    let m = out.metrics;
    println!(
        "model: {arch} {} ({} epochs)",
        cfg.train.activation,
        out.loss_history.len()
    );
    println!("test MSE  {:.6e}", m.mse);
    println!("test MAE  {:.6e}", m.mae);
    println!("test RMSE {:.6e}", m.rmse);
    println!("test R2   {:.6}", m.r2);
    println!("wrote {}", model_path.display());
    ctx.manifest(
        "train",
        json!({
            "model": model_path,
            "epochs_run": out.loss_history.len(),
            "final_train_loss": out.loss_history.last(),
            "test_metrics": m,
        }),
    )
}

#[derive(Serialize)]
struct Row {
    i: usize,
    h: usize,
    #[serde(flatten)]
    design: CandidateDesign,
}

pub fn explore(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.config;
    cfg.validate_for_dse().invalid("configuration")?;
    let table = ctx.coefficients()?;
    let i = cfg.arch().invalid("architecture")?.input;
    let widths = cfg.explore_widths();
    let per_width: Vec<Vec<CandidateDesign>> = widths
        .par_iter()
        .map(|&h| dse::enumerate(i, h, cfg.dse.mode, &table, cfg.dse.selection))
        .collect::<Result<_, _>>()
        .invalid("design-space exploration")?;
    let rows: Vec<Row> = widths
        .iter()
        .zip(per_width)
        .flat_map(|(&h, ds)| ds.into_iter().map(move |design| Row { i, h, design }))
        .collect();

    let mut table_text = format!(
        "{:>9} {:>2} {:>8} {:>6} {:>6} {:>12} {:>10} {:>5}\n",
        "network", "P", "mode", "muls", "adds", "latency", "LUT", "DSP"
    );
    let mut csv =
        String::from("I,H,P,mode,multipliers,adders,est_latency_cycles,est_lut,est_dsp\n");
    for r in &rows {
        let d = &r.design;
        let net = format!("{}-{}-{}", r.i, r.h, r.i);
        let _ = writeln!(
            table_text,
            "{net:>9} {:>2} {:>8} {:>6} {:>6} {:>12.1} {:>10.1} {:>5}",
            d.p,
            d.mode.as_str(),
            d.multipliers,
            d.adders,
            d.est_latency_cycles,
            d.est_lut,
            d.est_dsp
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.i,
            r.h,
            d.p,
            d.mode.as_str(),
            d.multipliers,
            d.adders,
            d.est_latency_cycles,
            d.est_lut,
            d.est_dsp
        );
    }
    print!("{table_text}");
    let path = ctx.path(Path::new("explore.csv"));
    ctx.write(&path, csv.as_bytes())?;
    println!("wrote {}", path.display());
    ctx.manifest("explore", json!({ "csv": path, "candidates": rows }))
}

fn pick_design(ctx: &Context, model: &AnnModel) -> Result<CandidateDesign, Failure> {
    let cfg = &ctx.config;
    let a = model.arch;
    let table = ctx.coefficients()?;
    let all = dse::enumerate(
        a.input,
        a.hidden,
        ctx.config.resource_mode(),
        &table,
        Selection::All,
    )
    .invalid("design-space exploration")?;
    let chosen = match cfg.codegen.p {
        Some(p) => all.into_iter().find(|d| d.p == p),
        None => dse::select(all, cfg.codegen.selection).into_iter().next(),
    };
    match chosen {
        Some(d) => Ok(d),
        None => invalid(format!("no design with P={:?} for {a}", cfg.codegen.p)),
    }
}

pub fn codegen(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.config;
    cfg.validate_for_dse().invalid("configuration")?;
    let model = ctx.load_model()?;
    if model.arch.input != model.arch.output {
        return invalid(format!(
            "unsupported architecture {}: output width must equal input width",
            model.arch
        ));
    }
    if !model.arch.hidden.is_power_of_two() {
        return invalid(format!(
            "model hidden width {} is not a power of two",
            model.arch.hidden
        ));
    }
    let design = pick_design(ctx, &model)?;
    let seed = ctx.seed(&model)?;
    let mut req = CodegenRequest::new(
        &model,
        design,
        cfg.codegen.core_name.clone(),
        seed,
        cfg.codegen.iterations,
    );
    req.resource_mode = cfg.resource_mode();
    let dir = ctx.path(&cfg.paths.codegen_dir);
    let mut bundle = generate_bundle(&req).runtime("code generation")?;
    bundle.manifest.config = Some(serde_json::to_value(cfg).expect("config serializes"));
    let written = match bundle.write_to(&dir, ctx.force) {
        Err(e @ chaosnet::codegen::CodegenError::Exists(_)) => {
            return Err(Failure::Invalid(e.into()))
        }
        other => other.runtime("writing bundle")?,
    };
    let design = &req.design;
    println!(
        "design: P={} ({} multipliers, {} adders, est. {:.1} cycles, {:.1} LUT)",
        design.p, design.multipliers, design.adders, design.est_latency_cycles, design.est_lut
    );
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn run(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let model = ctx.load_model()?;
    if model.arch.input != model.arch.output {
        return invalid(format!(
            "oscillator needs a square model, got {}",
            model.arch
        ));
    }
    let n = model.arch.output;
    let dims: Vec<usize> = cfg.run.dims.clone().unwrap_or_else(|| (0..n).collect());
    if let Some(&d) = dims.iter().find(|&&d| d >= n) {
        return invalid(format!("run.dims index {d} out of range for {n} outputs"));
    }
    let seed = ctx.seed(&model)?;
    let outputs = oscillator::generate(&model, &seed, cfg.run.iterations).runtime("oscillator")?;
    let bits =
        extract_bits(&outputs, n, cfg.run.bits_per_value, &dims).runtime("bit extraction")?;

    let mut csv = String::from("iteration");
    for d in 0..n {
        let _ = write!(csv, ",x{}", d + 1);
    }
    csv.push('\n');
    for (k, row) in outputs.chunks_exact(n).enumerate() {
        let _ = write!(csv, "{}", k + 1);
        for v in row {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    let seq_path = ctx.path(&cfg.paths.sequence);
    let bits_path = ctx.path(&cfg.paths.bits);
    ctx.write(&seq_path, csv.as_bytes())?;
    ctx.write(&bits_path, bits.as_bytes())?;
    println!("iterations: {}", cfg.run.iterations);
    println!(
        "bits: {} ({} per value, dims {:?})",
        bits.len(),
        cfg.run.bits_per_value,
        dims
    );
    println!("wrote {}", seq_path.display());
    println!("wrote {}", bits_path.display());
    ctx.manifest(
        "run",
        json!({
            "sequence": seq_path,
            "bits": bits_path,
            "bit_count": bits.len(),
            "seed_bits": hex_bits(&seed),
        }),
    )
}

pub fn randtest(
    ctx: &Context,
    input: Option<PathBuf>,
    bit_count: Option<usize>,
) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let path = input.unwrap_or_else(|| ctx.path(&cfg.paths.bits));
    let bytes = fs::read(&path).invalid(format!("reading bits {}", path.display()))?;
    let mut bits = BitStream::from_bytes(bytes);
    if let Some(n) = bit_count {
        if n > bits.len() {
            return invalid(format!(
                "--bit-count {n} exceeds the {} bits in {}",
                bits.len(),
                path.display()
            ));
        }
        bits.truncate(n);
    }
    let results = randtest::battery(&bits, cfg.randtest.block_size);

    println!(
        "{:<16} {:>10} {:>14} {:>12}  result",
        "test", "n", "statistic", "p-value"
    );
    let mut json_rows = Vec::new();
    let mut too_short = None;
    for entry in &results {
        match &entry.result {
            Ok(r) => {
                println!(
                    "{:<16} {:>10} {:>14.6} {:>12.6}  {}",
                    r.test_name,
                    r.n,
                    r.statistic,
                    r.p_value,
                    if r.pass { "pass" } else { "FAIL" }
                );
                json_rows.push(serde_json::to_value(r).expect("report serializes"));
            }
            Err(e) => {
                println!(
                    "{:<16} {:>10} {:>14} {:>12}  n/a ({e})",
                    entry.name,
                    bits.len(),
                    "-",
                    "-"
                );
                json_rows.push(
                    json!({ "test_name": entry.name, "n": bits.len(), "error": e.to_string() }),
                );
                if matches!(e, RandTestError::TooShort { .. }) {
                    too_short.get_or_insert_with(|| e.clone());
                }
            }
        }
    }
    let doc = json!({ "input": path, "alpha": randtest::ALPHA, "reports": json_rows });
    let text = serde_json::to_string_pretty(&doc).expect("report serializes");
    println!("{text}");
    let out = ctx.path(Path::new("randtest.json"));
    ctx.write(&out, format!("{text}\n").as_bytes())?;
    match too_short {
        Some(e) => Err(Failure::Runtime(
            anyhow::Error::new(e).context("randomness tests"),
        )),
        None => Ok(()),
    }
}

pub fn fit(ctx: &Context, measurements: &Path, output: Option<PathBuf>) -> Result<(), Failure> {
    let file =
        fs::File::open(measurements).invalid(format!("opening {}", measurements.display()))?;
    let records = dse::read_measurements(std::io::BufReader::new(file))
        .invalid(format!("reading measurements {}", measurements.display()))?;
    let provenance = format!("fitted from {}", measurements.display());
    let table = dse::calibrate_table(&records, &provenance).invalid("fitting coefficients")?;
    let out = output.unwrap_or_else(|| ctx.path(Path::new("coefficients.json")));
    let mut text = table.to_json();
    text.push('\n');
    ctx.write(&out, text.as_bytes())?;
    for mode in dse::DspMode::ALL {
        let [b3, b2, b1, b0] = table.latency(mode).as_array();
        println!(
            "{:>8}: latency/(I*H) = {b3:.6}P^3 + {b2:.6}P^2 + {b1:.6}P + {b0:.6}",
            mode.as_str()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
