use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use rotwave::carpets::{
    carpet, render_csv, render_image, revival_time, snapshot, CarpetGrid, CarpetKind, CarpetSpec, Heatmap,
    ImageFormat, Intensity,
};
use rotwave::ce::{self, CeAmplitudeSet};
use rotwave::dynamics::{evolve, fit_polynomial, tabulate, EnergyModel, LevelTable};
use rotwave::io::{format_coefficients, format_levels, parse_coefficients, parse_levels, Header};
use rotwave::revivals::{
    clone_scan, farey_windows, format_schedule, fractional_waves, predicted_q, recombine, schedule, Parity,
    RationalTime,
};
use rotwave::wavepacket::{
    build_axial, build_asymmetric, intelligent_residual, observables, symmetrize, Frame, ShExpansion, Symmetry,
    TruncationPolicy, WavePacketSpec,
};
use rotwave::Error;

use crate::args::*;
use crate::provenance::{stem, RunConfig};
use crate::CliError;

/// Shared global options.
pub struct Context<'a> {
    pub out_dir: &'a Path,
    pub format_version: u32,
    pub seed: u64,
}

impl Context<'_> {
    fn config(&self, command: &str) -> RunConfig {
        RunConfig::new(command, self.out_dir, self.format_version, self.seed)
    }
}

fn read_packet(cfg: &mut RunConfig, path: &Path) -> Result<ShExpansion, CliError> {
    let bytes = cfg.input("input", path)?;
    Ok(parse_coefficients(&String::from_utf8_lossy(&bytes), &path.display().to_string())?)
}

fn model(cfg: &mut RunConfig, args: &ModelArgs) -> Result<EnergyModel, CliError> {
    if let Some(p) = &args.levels {
        let bytes = cfg.input("levels", p)?;
        let lv = parse_levels(&String::from_utf8_lossy(&bytes), &p.display().to_string())?;
        return Ok(EnergyModel::Tabulated(lv));
    }
    if args.u238 {
        cfg.set("levels", "bundled-u238");
        return Ok(EnergyModel::Tabulated(ce::u238_levels()));
    }
    if let Some(a) = args.a {
        let b = args.b.unwrap_or(0.0);
        cfg.set("model", "polynomial").set("a", a).set("b", b);
        return Ok(EnergyModel::polynomial(a, b)?);
    }
    cfg.set("model", "rigid").set("omega0", args.omega0);
    Ok(EnergyModel::rigid_rotor(args.omega0)?)
}

fn frame_name(f: Frame) -> &'static str {
    match f {
        Frame::SymmetryAxisIsX => "x",
        Frame::SymmetryAxisIsZ => "z",
    }
}

pub fn build(ctx: &Context, a: &BuildArgs) -> Result<String, CliError> {
    let mut cfg = ctx.config("build");
    let sym = if a.symmetric { Symmetry::Symmetric } else { Symmetry::Asymmetric };
    let frame = match a.frame {
        Some(FrameArg::X) => Frame::SymmetryAxisIsX,
        Some(FrameArg::Z) => Frame::SymmetryAxisIsZ,
        None if a.eta == 0.0 => Frame::SymmetryAxisIsZ,
        None => Frame::SymmetryAxisIsX,
    };
    cfg.set("n", a.n)
        .set("eta", a.eta)
        .set("symmetry", sym)
        .set("frame", frame_name(frame))
        .set("epsilon", a.epsilon)
        .set_opt("i-cap", a.i_cap);
    let policy = TruncationPolicy {
        epsilon: a.epsilon,
        i_cap: a.i_cap,
    };
    let spec = WavePacketSpec::with_truncation(a.n, a.eta, sym, policy)?;
    let wp = match frame {
        Frame::SymmetryAxisIsZ => build_axial(&spec)?,
        Frame::SymmetryAxisIsX => {
            let asym = build_asymmetric(&spec)?;
            match sym {
                Symmetry::Asymmetric => asym,
                Symmetry::Symmetric => symmetrize(&asym, &spec)?,
            }
        }
    };
    let p = cfg.write(&a.output, format_coefficients(&wp, &cfg.header()).as_bytes())?;
    cfg.write_echo(stem(&a.output))?;
    Ok(format!(
        "wrote {} ({} terms, i_max {})\n",
        p.display(),
        wp.len(),
        wp.i_max()
    ))
}

pub fn observe(ctx: &Context, a: &ObserveArgs) -> Result<String, CliError> {
    let mut cfg = ctx.config("observe");
    let wp = read_packet(&mut cfg, &a.input)?;
    let o = observables(&wp);
    let mut r = String::new();
    let _ = writeln!(r, "norm: {}", wp.norm_sqr().sqrt());
    let _ = writeln!(r, "i_max: {}", wp.i_max());
    let _ = writeln!(r, "terms: {}", wp.len());
    let _ = writeln!(r, "frame: {}", frame_name(wp.frame()));
    for (k, v) in [
        ("lx", o.lx),
        ("ly", o.ly),
        ("lz", o.lz),
        ("var_lx", o.var_lx),
        ("var_ly", o.var_ly),
        ("l2", o.l2),
        ("i_bar", o.i_bar),
    ] {
        let _ = writeln!(r, "{k}: {v}");
    }
    if let (Some(eta), Frame::SymmetryAxisIsX) = (wp.info().eta, wp.frame()) {
        let _ = writeln!(r, "intelligent_residual: {}", intelligent_residual(&wp, eta));
    }
    let text = cfg.header().render() + &r;
    cfg.write(&a.output, text.as_bytes())?;
    cfg.write_echo(stem(&a.output))?;
    Ok(r)
}

pub fn evolve_cmd(ctx: &Context, a: &EvolveArgs) -> Result<String, CliError> {
    let mut cfg = ctx.config("evolve");
    let wp = read_packet(&mut cfg, &a.input)?;
    let m = model(&mut cfg, &a.model)?;
    cfg.set("t", a.t).set("absolute", a.absolute);
    let (t_rev, exact) = revival_time(&wp, &m)?;
    let t = if a.absolute { a.t } else { a.t * t_rev };
    let out = evolve(&wp, &m, t)?;
    let mut h = cfg.header();
    h.push("t", t)
        .push("t-rev", t_rev)
        .push("t-rev-source", if exact { "exact" } else { "estimated" });
    let p = cfg.write(&a.output, format_coefficients(&out, &h).as_bytes())?;
    cfg.write_echo(stem(&a.output))?;
    Ok(format!("wrote {} at t = {t} (T_rev = {t_rev})\n", p.display()))
}

fn parity(p: ParityArg) -> Parity {
    match p {
        ParityArg::All => Parity::AllI,
        ParityArg::Even => Parity::EvenIOnly,
    }
}

pub fn schedule_cmd(ctx: &Context, a: &ScheduleArgs) -> Result<String, CliError> {
    let mut cfg = ctx.config("schedule");
    let par = parity(a.parity);
    cfg.set("parity", par);
    let times = match (a.m, a.n, a.n_max) {
        (Some(m), Some(n), _) => {
            cfg.set("m", m).set("n", n);
            vec![RationalTime::new(m, n)?]
        }
        (_, _, Some(n_max)) => {
            cfg.set("n-max", n_max).set("t-max", a.t_max);
            farey_windows(n_max, a.t_max)
        }
        _ => return Err(CliError::Usage("give --m and --n, or --n-max".into())),
    };
    let mut table = cfg.header().render();
    table.push_str("# columns: m n parity l q s re im\n");
    let mut summary = String::new();
    for rt in times {
        let s = schedule(rt, par);
        table.push_str(&format_schedule(&s));
        let _ = writeln!(summary, "{rt} {par}: l = {}, q = {}", s.l, s.q);
    }
    cfg.write(&a.output, table.as_bytes())?;
    cfg.write_echo(stem(&a.output))?;
    Ok(summary)
}

pub fn fractions(ctx: &Context, a: &FractionsArgs) -> Result<String, CliError> {
    let mut cfg = ctx.config("fractions");
    let wp = read_packet(&mut cfg, &a.input)?.normalized()?;
    cfg.set("m", a.m).set("n", a.n).set("omega0", a.omega0).set("write-waves", a.write_waves);
    let rt = RationalTime::new(a.m, a.n)?;
    let m = EnergyModel::rigid_rotor(a.omega0)?;
    let waves = fractional_waves(&wp, rt, &m)?;
    let direct = evolve(&wp, &m, rt.value() * 2.0 * std::f64::consts::PI / a.omega0)?;
    let residual = recombine(&waves)?.distance(&direct);
    let report = clone_scan(&wp, &direct)?;
    let par = Parity::of(&wp);
    let sched = schedule(rt, par);

    let mut r = String::new();
    let _ = writeln!(r, "time: {rt}");
    let _ = writeln!(r, "parity: {par}");
    let _ = writeln!(r, "l: {}", sched.l);
    let _ = writeln!(r, "q: {}", sched.q);
    let _ = writeln!(r, "q_predicted: {}", predicted_q(rt, par));
    let _ = writeln!(r, "reconstruction_error: {residual:e}");
    let _ = writeln!(r, "classification: {}", report.classification);
    let _ = writeln!(r, "q_observed: {}", report.q_observed);
    let _ = writeln!(r, "captured: {}", report.captured);
    let _ = writeln!(r, "# wave s t_s re(a_s) im(a_s) |a_s|^2");
    for w in &waves {
        let _ = writeln!(
            r,
            "wave {} {} {:e} {:e} {:e}",
            w.s,
            w.effective_time,
            w.amplitude.re,
            w.amplitude.im,
            w.amplitude.norm_sqr()
        );
    }
    let _ = writeln!(r, "# peak phi overlap");
    for p in &report.peaks {
        let _ = writeln!(r, "peak {:e} {:e}", p.phi, p.overlap);
    }
    let text = cfg.header().render() + &r;
    let base = stem(&a.output).to_owned();
    cfg.write(&a.output, text.as_bytes())?;
    if a.write_waves {
        for w in &waves {
            let mut h = cfg.header();
            h.push("fractional-wave", w.s).push("effective-time", w.effective_time);
            cfg.write(&format!("{base}.wave{}.txt", w.s), format_coefficients(&w.wave, &h).as_bytes())?;
        }
    }
    cfg.write_echo(&base)?;
    Ok(r)
}

fn intensity(r: &RenderArgs) -> Intensity {
    match r.log_decades {
        Some(decades) => Intensity::Log { decades },
        None => Intensity::Linear,
    }
}

fn record_render(cfg: &mut RunConfig, r: &RenderArgs) {
    let f: Vec<&str> = r
        .formats
        .iter()
        .map(|f| match f {
            FormatArg::Csv => "csv",
            FormatArg::Pgm => "pgm",
            FormatArg::Ppm => "ppm",
        })
        .collect();
    cfg.set("formats", f.join(",")).set_opt("log-decades", r.log_decades);
}

fn write_heatmap(cfg: &RunConfig, grid: &impl Heatmap, r: &RenderArgs, base: &str, extra: &Header) -> Result<Vec<String>, CliError> {
    let mut h = cfg.header();
    h.extend(extra);
    let mut written = Vec::new();
    let mut formats = r.formats.clone();
    formats.dedup();
    for f in formats {
        let (name, bytes) = match f {
            FormatArg::Csv => (format!("{base}.csv"), render_csv(grid, &h).into_bytes()),
            FormatArg::Pgm => (format!("{base}.pgm"), render_image(grid, ImageFormat::Pgm, intensity(r), &h)),
            FormatArg::Ppm => (format!("{base}.ppm"), render_image(grid, ImageFormat::Ppm, intensity(r), &h)),
        };
        written.push(cfg.write(&name, &bytes)?.display().to_string());
    }
    Ok(written)
}

pub fn carpet_cmd(ctx: &Context, a: &CarpetArgs) -> Result<String, CliError> {
    let mut cfg = ctx.config("carpet");
    let wp = read_packet(&mut cfg, &a.input)?;
    let m = model(&mut cfg, &a.model)?;
    let kind = match a.theta_cut {
        CutArg::Equatorial => CarpetKind::EquatorialCut,
        CutArg::Ring => CarpetKind::RingProfile,
    };
    cfg.set("theta-cut", kind)
        .set("angle-samples", a.angle_samples)
        .set("t-samples", a.t_samples)
        .set("t-max", a.t_max)
        .set("annotate", a.annotate);
    record_render(&mut cfg, &a.render);
    let spec = CarpetSpec::new(kind, a.angle_samples, a.t_samples, a.t_max)?;
    let grid = carpet(&wp, &m, &spec)?;
    let mut out = write_heatmap(&cfg, &grid, &a.render, &a.output, &Header::new())?;
    if a.annotate {
        out.push(write_windows(&cfg, &grid, Parity::of(&wp), &a.output)?);
    }
    cfg.write_echo(&a.output)?;
    Ok(out.iter().map(|p| format!("wrote {p}\n")).collect())
}

/// Revival windows on the carpet's time axis, with the expected counts.
fn write_windows(cfg: &RunConfig, grid: &CarpetGrid, par: Parity, base: &str) -> Result<String, CliError> {
    let mut s = cfg.header().render();
    s.push_str("# columns: m n t column q_predicted\n");
    for rt in farey_windows(24, grid.spec.t_max) {
        let _ = writeln!(
            s,
            "{} {} {} {} {}",
            rt.m(),
            rt.n(),
            rt.value(),
            grid.nearest_column(rt.value()),
            predicted_q(rt, par)
        );
    }
    Ok(cfg.write(&format!("{base}.windows.txt"), s.as_bytes())?.display().to_string())
}

pub fn snapshot_cmd(ctx: &Context, a: &SnapshotArgs) -> Result<String, CliError> {
    let mut cfg = ctx.config("snapshot");
    let wp = read_packet(&mut cfg, &a.input)?;
    let m = model(&mut cfg, &a.model)?;
    cfg.set("t", a.t)
        .set("theta-samples", a.theta_samples)
        .set("phi-samples", a.phi_samples)
        .set("phi-offset", a.phi_offset);
    record_render(&mut cfg, &a.render);
    let (t_rev, _) = revival_time(&wp, &m)?;
    let wt = evolve(&wp, &m, a.t * t_rev)?;
    let grid = snapshot(&wt, a.theta_samples, a.phi_samples, a.phi_offset, a.t)?;
    let out = write_heatmap(&cfg, &grid, &a.render, &a.output, &Header::new())?;
    cfg.write_echo(&a.output)?;
    let mut s: String = out.iter().map(|p| format!("wrote {p}\n")).collect();
    let _ = writeln!(s, "sphere integral: {}", grid.quadrature());
    Ok(s)
}

pub fn ce_ingest(ctx: &Context, a: &CeIngestArgs) -> Result<String, CliError> {
    let mut cfg = ctx.config("ce-ingest");
    let mut set = match &a.input {
        Some(p) => {
            let bytes = cfg.input("input", p)?;
            ce::parse_amplitudes(&String::from_utf8_lossy(&bytes), &p.display().to_string())?
        }
        None => {
            cfg.set("synthetic", true)
                .set("center", a.center)
                .set("width", a.width)
                .set("i-max", a.i_max)
                .set("jitter", a.jitter);
            let mut set = ce::synthetic_amplitudes(a.center, a.width, a.i_max)?;
            jitter(&mut set, a.jitter, ctx.seed)?;
            set
        }
    };
    cfg.set_opt("source", a.source.as_deref());
    if let Some(src) = &a.source {
        set.source_note = Some(src.clone());
    }
    let wp = ce::expansion_from_amplitudes(&set)?;
    let base = stem(&a.output).to_owned();
    let p = cfg.write(&a.output, format_coefficients(&wp, &cfg.header()).as_bytes())?;
    let mut s = format!("wrote {}\n", p.display());
    if set.synthetic {
        let q = cfg.write(
            &format!("{base}.amplitudes.txt"),
            ce::format_amplitudes(&set, &cfg.header()).as_bytes(),
        )?;
        let _ = writeln!(s, "wrote {}", q.display());
    }
    cfg.write_echo(&base)?;
    let _ = writeln!(s, "i_bar: {}", ce::ibar_from_coefficients(&wp));
    let _ = writeln!(s, "terms: {}", wp.len());
    Ok(s)
}

/// Multiplies each amplitude by `1 + σ g` with seeded standard normal `g`.
fn jitter(set: &mut CeAmplitudeSet, sigma: f64, seed: u64) -> Result<(), CliError> {
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (_, amp) in set.entries.iter_mut() {
        *amp *= Complex64::new(1.0 + normal.sample(&mut rng), 0.0);
    }
    if let Some(note) = &mut set.source_note {
        let _ = write!(note, ", jitter {sigma} seed {seed}");
    }
    Ok(())
}

pub fn fit_levels(ctx: &Context, a: &FitLevelsArgs) -> Result<String, CliError> {
    let mut cfg = ctx.config("fit-levels");
    let base = stem(&a.output).to_owned();
    let mut extra = String::new();
    let table: LevelTable = if let Some(p) = &a.levels {
        let bytes = cfg.input("levels", p)?;
        parse_levels(&String::from_utf8_lossy(&bytes), &p.display().to_string())?
    } else if a.u238 {
        cfg.set("levels", "bundled-u238");
        ce::u238_levels()
    } else {
        let av = a.a.ok_or_else(|| CliError::Usage("--synthetic needs --a".into()))?;
        cfg.set("synthetic", true)
            .set("a", av)
            .set("b", a.b)
            .set("noise", a.noise)
            .set("i-max", a.i_max);
        let clean = tabulate(&EnergyModel::polynomial(av, a.b)?, (0..=a.i_max).step_by(2))?;
        let lv = if a.noise > 0.0 {
            let normal = Normal::new(0.0, a.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            clean.into_iter().map(|(i, e)| (i, e + normal.sample(&mut rng))).collect()
        } else {
            clean
        };
        // noise can break monotonicity; the fit does not need it
        let table = LevelTable::new(lv.clone(), None).unwrap_or_default();
        let mut h = cfg.header();
        h.push("synthetic", true);
        let text = if table.is_empty() {
            let mut s = h.render();
            for (i, e) in &lv {
                let _ = writeln!(s, "{i} {e:.17e}");
            }
            s
        } else {
            format_levels(&table, &h)
        };
        let p = cfg.write(&format!("{base}.levels.txt"), text.as_bytes())?;
        let _ = writeln!(extra, "wrote {}", p.display());
        let fit = fit_polynomial(&lv)?;
        return finish_fit(&cfg, &a.output, &base, fit, None, extra);
    };
    let fit = fit_polynomial(table.levels())?;
    finish_fit(&cfg, &a.output, &base, fit, table.unit().map(str::to_owned), extra)
}

fn finish_fit(
    cfg: &RunConfig,
    output: &str,
    base: &str,
    fit: rotwave::dynamics::PolynomialFit,
    unit: Option<String>,
    mut extra: String,
) -> Result<String, CliError> {
    let mut r = String::new();
    let _ = writeln!(r, "model: E = a I(I+1) + b [I(I+1)]^2");
    let _ = writeln!(r, "a: {}", fit.a);
    let _ = writeln!(r, "b: {}", fit.b);
    let _ = writeln!(r, "rms: {:e}", fit.rms);
    let _ = writeln!(r, "points: {}", fit.points);
    let _ = writeln!(r, "unit: {}", unit.as_deref().unwrap_or("unspecified"));
    let text = cfg.header().render() + &r;
    cfg.write(output, text.as_bytes())?;
    cfg.write_echo(base)?;
    extra.push_str(&r);
    Ok(extra)
}

pub fn replay(ctx: &Context, a: &ReplayArgs) -> Result<String, CliError> {
    let mut cfg = ctx.config("replay");
    let wp = read_packet(&mut cfg, &a.input)?;
    let real = model(&mut cfg, &a.model)?;
    let omega0 = match (a.ideal_omega0, &real) {
        (Some(w), _) => w,
        (None, EnergyModel::RigidRotor { omega0 }) => *omega0,
        (None, EnergyModel::Polynomial { a, .. }) => *a,
        (None, EnergyModel::Tabulated(t)) => fit_polynomial(t.levels())?.a,
    };
    cfg.set("ideal-omega0", omega0)
        .set("angle-samples", a.angle_samples)
        .set("t-samples", a.t_samples)
        .set("t-max", a.t_max);
    record_render(&mut cfg, &a.render);
    let ideal = EnergyModel::rigid_rotor(omega0)?;
    let pair = ce::replay(&wp, &ideal, &real, a.angle_samples, a.t_samples, a.t_max)?;
    let mut out = Vec::new();
    for (tag, g) in [("ideal", &pair.ideal), ("real", &pair.real)] {
        out.extend(write_heatmap(&cfg, g, &a.render, &format!("{}_{tag}", a.output), &Header::new())?);
    }
    let mut r = String::new();
    let _ = writeln!(r, "i_bar: {}", ce::ibar_from_coefficients(&wp));
    let _ = writeln!(r, "t_rev_ideal: {}", pair.ideal.t_rev);
    let _ = writeln!(r, "t_rev_real: {}", pair.real.t_rev);
    let _ = writeln!(r, "t_rev_real_source: {}", if pair.real.t_rev_exact { "exact" } else { "estimated" });
    if a.t_max >= 1.0 {
        for (tag, g) in [("ideal", &pair.ideal), ("real", &pair.real)] {
            let _ = writeln!(r, "revival_deviation_{tag}: {:e}", revival_deviation(g));
        }
    }
    let text = cfg.header().render() + &r;
    cfg.write(&format!("{}.txt", a.output), text.as_bytes())?;
    cfg.write_echo(&a.output)?;
    let mut s: String = out.iter().map(|p| format!("wrote {p}\n")).collect();
    s.push_str(&r);
    Ok(s)
}

/// Largest difference between the first column and the column at `T_rev`.
fn revival_deviation(g: &CarpetGrid) -> f64 {
    let j = g.nearest_column(1.0);
    g.column(0)
        .iter()
        .zip(g.column(j))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
