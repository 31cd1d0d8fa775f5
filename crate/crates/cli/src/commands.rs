//! The experiment commands. Every command writes its artifacts under the
//! output directory and finishes with a `manifest.json` recording config and
//! file digests.

use std::path::{Path, PathBuf};

use lsfm_core::forward::{
    detect_sigma_properties, illumination_heights, measure_sweep, SigmaProfile,
};
use lsfm_core::geometry::IllumSide;
use lsfm_core::io;
use lsfm_core::linsys::{assemble_block, sart, SartOptions, SystemBlock};
use lsfm_core::noise::poissonize;
use lsfm_core::phantom::{make_dataset, PhantomSet};
use lsfm_core::stability::{
    alpha_mass_leak, bump, bump_mixture, c7_constant, c8_constant, empirical_lipschitz,
    energy_identity_check, verify_lemma, Branch, DiskBranch,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::manifest::{ManifestBuilder, OutputManifest};
use crate::plot::{line_plot, Series};
use crate::CliError;

fn ensure_out(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Other(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn phantom_of(cfg: &RunConfig) -> Result<PhantomSet, CliError> {
    Ok(make_dataset(&cfg.dataset, cfg.seed)?)
}

fn builder(
    name: &str,
    cfg: &RunConfig,
    out: &Path,
    config_path: Option<&str>,
) -> Result<ManifestBuilder, CliError> {
    let mut mb = ManifestBuilder::new(name, &cfg.canonical_json(), out);
    if let Some(path) = config_path {
        mb.add_input(Path::new(path))?;
    }
    if let Some(mask) = &cfg.dataset.mask_path {
        mb.add_input(Path::new(mask))?;
    }
    Ok(mb)
}

/// `phantom`: generate the dataset and serialize its fields.
pub fn run_phantom(cfg: &RunConfig, config_path: Option<&str>) -> Result<OutputManifest, CliError> {
    let out = ensure_out(cfg)?;
    let mut mb = builder("phantom", cfg, &out, config_path)?;
    let phantom = phantom_of(cfg)?;
    for name in io::write_phantom(&out, &phantom)? {
        mb.add_output(out.join(name));
    }
    mb.finish()
}

/// `sigma`: profiles for every requested depth and side, plus the interval
/// table across depths.
pub fn run_sigma(cfg: &RunConfig, config_path: Option<&str>) -> Result<OutputManifest, CliError> {
    let out = ensure_out(cfg)?;
    let mut mb = builder("sigma", cfg, &out, config_path)?;
    let phantom = phantom_of(cfg)?;
    let mut table_rows: Vec<Vec<String>> = Vec::new();
    for &s in &cfg.s_list {
        for side in [IllumSide::Left, IllumSide::Right] {
            let prof = detect_sigma_properties(&phantom, s, side, cfg.sigma_samples, 1e-14)?;
            let tag = match side {
                IllumSide::Left => "L",
                IllumSide::Right => "R",
            };
            let base = out.join(format!("sigma_ds{}_s{}_{}", cfg.dataset.kind, s, tag));
            io::write_sigma_profile(&base, &prof)?;
            mb.add_output(format!("{}.csv", base.display()));
            mb.add_output(format!("{}.json", base.display()));
            let ((a1, b1), (a2, b2)) = prof.observation_intervals();
            table_rows.push(
                [s, prof.t1, prof.t2, prof.t_obs, a1, b1, a2, b2]
                    .iter()
                    .map(|v| io::fmt_f64(*v))
                    .chain([tag.to_string()])
                    .collect(),
            );
        }
    }
    let table = out.join("observation_intervals.csv");
    io::write_csv(
        &table,
        &["s", "t1", "t2", "t", "lo1", "hi1", "lo2", "hi2", "side"],
        &table_rows,
    )?;
    mb.add_output(table);
    mb.finish()
}

fn sweep_depths(phantom: &PhantomSet, m2: usize) -> Vec<f64> {
    let margin = 0.02 * (phantom.s_plus - phantom.s_minus);
    let lo = phantom.s_minus + margin;
    let hi = phantom.s_plus - margin;
    (0..m2).map(|k| lo + (hi - lo) * (k as f64 + 0.5) / m2 as f64).collect()
}

/// `measure`: full sweep over pixels and illuminations, clean and
/// photon-noised.
pub fn run_measure(cfg: &RunConfig, config_path: Option<&str>) -> Result<OutputManifest, CliError> {
    let out = ensure_out(cfg)?;
    let mut mb = builder("measure", cfg, &out, config_path)?;
    let phantom = phantom_of(cfg)?;
    let depths = sweep_depths(&phantom, cfg.m2);
    let ms = measure_sweep(&phantom, &depths, cfg.m1, cfg.camera_gain)?;
    let base = out.join("measurements");
    io::write_measurements(&base, &ms)?;
    mb.add_output(out.join("measurements.csv"));
    mb.add_output(out.join("measurements.json"));

    let scale = cfg.photon_scale.unwrap_or(phantom.params.photon_scale);
    let mut noisy = ms.clone();
    for k in 0..noisy.p.nrows() {
        let row = noisy.p.row(k).to_owned();
        let noised = poissonize(&row, scale, cfg.seed.wrapping_add(k as u64))?;
        noisy.p.row_mut(k).assign(&noised);
    }
    let base_noisy = out.join("measurements_noisy");
    io::write_measurements(&base_noisy, &noisy)?;
    mb.add_output(out.join("measurements_noisy.csv"));
    mb.add_output(out.join("measurements_noisy.json"));
    mb.finish()
}

/// `assemble`: dense block per requested depth.
pub fn run_assemble(cfg: &RunConfig, config_path: Option<&str>) -> Result<OutputManifest, CliError> {
    let out = ensure_out(cfg)?;
    let mut mb = builder("assemble", cfg, &out, config_path)?;
    let phantom = phantom_of(cfg)?;
    let heights = illumination_heights(&phantom, cfg.m1);
    for &s in &cfg.s_list {
        let block = assemble_block(&phantom, s, &heights, cfg.camera_gain, cfg.support_dilation)?;
        let base = out.join(format!("block_ds{}_s{}", cfg.dataset.kind, s));
        io::write_block(&base, &block)?;
        mb.add_output(format!("{}.csv", base.display()));
        mb.add_output(format!("{}.json", base.display()));
    }
    mb.finish()
}

fn radius_mask(phantom: &PhantomSet, s: f64, radius: f64) -> Vec<bool> {
    let (cx, cy) = (phantom.params.s1 / 2.0, 0.0);
    phantom
        .grid
        .ys()
        .iter()
        .map(|&y| (s - cx).powi(2) + (y - cy).powi(2) <= radius * radius)
        .collect()
}

/// `cond-sweep`: condition numbers vs support radius per depth, plus the
/// full-vs-limited illumination comparison per depth.
pub fn run_cond_sweep(
    cfg: &RunConfig,
    config_path: Option<&str>,
) -> Result<OutputManifest, CliError> {
    let out = ensure_out(cfg)?;
    let mut mb = builder("cond-sweep", cfg, &out, config_path)?;
    let phantom = phantom_of(cfg)?;
    let heights = illumination_heights(&phantom, cfg.m1);

    type DepthResult = (f64, Vec<(f64, usize, f64)>, Option<(f64, f64)>);
    let per_depth: Vec<Result<DepthResult, CliError>> = cfg
        .depths
        .par_iter()
        .map(|&s| {
            let block = assemble_block(&phantom, s, &heights, cfg.camera_gain, 0)?;
            let all_rows = vec![true; block.a.nrows()];
            let mut by_radius = Vec::new();
            for &r in &cfg.radii {
                let mask = radius_mask(&phantom, s, r);
                let ncols = mask.iter().filter(|&&m| m).count();
                let sub = block.restrict(&all_rows, &mask)?;
                by_radius.push((r, ncols, sub.condition_number()?));
            }
            // full vs limited illumination on the ground-truth support
            let support = block.column_mask.clone();
            let full_vs_limited = if support.iter().filter(|&&m| m).count() >= 2 {
                let left =
                    detect_sigma_properties(&phantom, s, IllumSide::Left, None, 1e-14)?;
                let right =
                    detect_sigma_properties(&phantom, s, IllumSide::Right, None, 1e-14)?;
                let full = block.restrict(&all_rows, &support)?;
                let limited_rows = block.limited_row_mask(&left, &right);
                if limited_rows.iter().filter(|&&m| m).count() >= 2 {
                    let limited = block.restrict(&limited_rows, &support)?;
                    Some((full.condition_number()?, limited.condition_number()?))
                } else {
                    None
                }
            } else {
                None
            };
            Ok((s, by_radius, full_vs_limited))
        })
        .collect();

    let mut radius_rows: Vec<Vec<String>> = Vec::new();
    let mut fl_rows: Vec<Vec<String>> = Vec::new();
    for item in per_depth {
        let (s, by_radius, fl) = item?;
        for (r, ncols, kappa) in by_radius {
            radius_rows.push(vec![
                io::fmt_f64(s),
                io::fmt_f64(r),
                ncols.to_string(),
                io::fmt_f64(kappa),
            ]);
        }
        if let Some((full, limited)) = fl {
            fl_rows.push(vec![io::fmt_f64(s), io::fmt_f64(full), io::fmt_f64(limited)]);
        }
    }
    let p1 = out.join("cond_vs_radius.csv");
    io::write_csv(&p1, &["s", "radius", "ncols", "kappa"], &radius_rows)?;
    mb.add_output(p1);
    let p2 = out.join("cond_full_vs_limited.csv");
    io::write_csv(&p2, &["s", "kappa_full", "kappa_limited"], &fl_rows)?;
    mb.add_output(p2);
    mb.finish()
}

/// `reconstruct`: one depth, noisy data, SART with full and limited
/// illumination.
pub fn run_reconstruct(
    cfg: &RunConfig,
    config_path: Option<&str>,
) -> Result<OutputManifest, CliError> {
    let out = ensure_out(cfg)?;
    let mut mb = builder("reconstruct", cfg, &out, config_path)?;
    let phantom = phantom_of(cfg)?;
    let s = cfg.reconstruct_s;
    let heights = illumination_heights(&phantom, cfg.m1);
    let block = assemble_block(&phantom, s, &heights, cfg.camera_gain, cfg.support_dilation)?;
    let left = detect_sigma_properties(&phantom, s, IllumSide::Left, None, 1e-14)?;
    let right = detect_sigma_properties(&phantom, s, IllumSide::Right, None, 1e-14)?;

    let scale = cfg.photon_scale.unwrap_or(phantom.params.photon_scale);
    let noisy = poissonize(&block.b, scale, cfg.seed)?;
    let noisy_block = SystemBlock { b: noisy, ..block.clone() };

    let support = block.column_mask.clone();
    let all_rows = vec![true; block.a.nrows()];
    let full = noisy_block.restrict(&all_rows, &support)?;
    let limited_rows = block.limited_row_mask(&left, &right);
    let limited = noisy_block.restrict(&limited_rows, &support)?;

    let opts = SartOptions {
        omega: cfg.omega,
        max_sweeps: cfg.sweeps,
        nonneg: cfg.nonneg,
        seed: Some(cfg.seed),
        ..Default::default()
    };
    let rec_full = sart(&full.a, &full.b, None, &opts)?;
    let rec_limited = sart(&limited.a, &limited.b, None, &opts)?;

    let mu = phantom.mu_slice(s);
    let ys = phantom.grid.ys();
    let cells = full.column_cells.clone();
    let truth: Vec<f64> = cells.iter().map(|&j| mu[j]).collect();
    let row_ys: Vec<f64> = cells.iter().map(|&j| ys[j]).collect();
    let p1 = out.join("reconstruction.csv");
    io::write_reconstruction(&p1, &cells, &row_ys, &truth, &rec_limited.mu_hat, &rec_full.mu_hat)?;
    mb.add_output(p1);

    let n = rec_full.residual_history.len().max(rec_limited.residual_history.len());
    let res_rows: Vec<Vec<String>> = (0..n)
        .map(|k| {
            let rf = rec_full.residual_history.get(k).copied().unwrap_or(f64::NAN);
            let rl = rec_limited.residual_history.get(k).copied().unwrap_or(f64::NAN);
            vec![k.to_string(), io::fmt_f64(rf), io::fmt_f64(rl)]
        })
        .collect();
    let p2 = out.join("residuals.csv");
    io::write_csv(&p2, &["sweep", "residual_full", "residual_limited"], &res_rows)?;
    mb.add_output(p2);
    mb.finish()
}

/// `stability`: the constants, the energy identity order test, and the
/// curve-ratio sweeps.
pub fn run_stability(
    cfg: &RunConfig,
    config_path: Option<&str>,
) -> Result<OutputManifest, CliError> {
    let out = ensure_out(cfg)?;
    let mut mb = builder("stability", cfg, &out, config_path)?;

    // alpha / C7 curve and the lemma verification per observation time
    let mut alpha_rows = Vec::new();
    for k in 0..=32 {
        let t = 1e-3 * (1000f64).powf(k as f64 / 32.0);
        alpha_rows.push(vec![
            io::fmt_f64(t),
            io::fmt_f64(alpha_mass_leak(cfg.stab_r, t)?),
            io::fmt_f64(c7_constant(cfg.stab_r, t)?),
        ]);
    }
    let p_alpha = out.join("alpha_curve.csv");
    io::write_csv(&p_alpha, &["t", "alpha", "c7"], &alpha_rows)?;
    mb.add_output(p_alpha);

    for &t in &cfg.stab_times {
        let mut report = verify_lemma(cfg.stab_r, t, cfg.stab_family, cfg.seed, 513)?;
        report.c8 = Some(c8_constant(cfg.stab_r, 0.5 * t, t)?);
        let path = out.join(format!("lemma_t{t}.json"));
        io::write_json(&path, &report)?;
        mb.add_output(path);
    }

    // energy identity order measurement on the analytic dataset-1 branch
    let psi0 = cfg.stab_energy_c * cfg.dataset.w1;
    let branch = DiskBranch::new(1.0, 0.0, 0.8, 0.88, psi0)?;
    let t_end = branch.t_end();
    let u0 = bump(branch.y_window_lo(), 0.0, 1025, -0.35, 0.15, 1.0)?;
    let ts: Vec<f64> =
        (0..12).map(|k| t_end * (0.25 + 0.5 * k as f64 / 11.0)).collect();
    let mut energy_rows = Vec::new();
    let mut devs = Vec::new();
    for k in 0..4 {
        let dt = t_end / (16.0 * 2f64.powi(k));
        let dev = energy_identity_check(&u0, &branch, 0.05, &ts, dt, 4096)?;
        devs.push((dt, dev));
        energy_rows.push(vec![io::fmt_f64(dt), io::fmt_f64(dev)]);
    }
    let slope = {
        let pts: Vec<(f64, f64)> =
            devs.iter().map(|&(dt, d)| (dt.ln(), d.max(1e-300).ln())).collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    let p_energy = out.join("energy_identity.csv");
    io::write_csv(&p_energy, &["dt", "max_deviation"], &energy_rows)?;
    mb.add_output(p_energy);
    let p_slope = out.join("energy_identity.json");
    io::write_json(&p_slope, &serde_json::json!({ "order": slope, "t_end": t_end }))?;
    mb.add_output(p_slope);

    // empirical curve-ratio sweeps on the dataset-1 profile
    let curve_params = lsfm_core::phantom::DatasetParams {
        c_diff: cfg.stab_curve_c,
        ..cfg.dataset.clone()
    };
    let curve_phantom = make_dataset(&curve_params, cfg.seed)?;
    let profile =
        detect_sigma_properties(&curve_phantom, 0.88, IllumSide::Left, Some(512), 1e-14)?;
    let t_primes: Vec<f64> = (1..=cfg.t_prime_count)
        .map(|k| profile.t_obs * (0.15 + 0.84 * (k - 1) as f64 / (cfg.t_prime_count - 1) as f64))
        .collect();
    for &delta in &cfg.delta_list {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let family: Vec<_> = (0..12)
            .map(|_| {
                bump_mixture(
                    &mut rng,
                    profile.y_lo + delta,
                    profile.y_hi - delta,
                    profile.y_lo,
                    profile.y_hi,
                    1025,
                )
            })
            .collect::<lsfm_core::Result<_>>()?;
        let sweep = empirical_lipschitz(&profile, &family, delta, &t_primes, 256)?;
        let pairs: Vec<(f64, f64)> =
            sweep.t_primes.iter().cloned().zip(sweep.sup_ratios.iter().cloned()).collect();
        let path = out.join(format!("lipschitz_delta{delta}.csv"));
        io::write_sweep(&path, &pairs)?;
        mb.add_output(path);
    }

    // slide toward the window edge
    let delta = 0.05;
    let halfwidth = 0.04;
    let dists = [0.30, 0.20, 0.12, 0.07, 0.045, 0.028, 0.016, 0.008];
    let mut slide_rows = Vec::new();
    for &d in &dists {
        let center = profile.y_lo + delta + d + halfwidth;
        let u0 = bump(profile.y_lo, profile.y_hi, 1025, center, halfwidth, 1.0)?;
        let sweep = empirical_lipschitz(&profile, &[u0], delta, &[profile.t_obs], 512)?;
        slide_rows.push(vec![io::fmt_f64(d), io::fmt_f64(sweep.sup_ratios[0])]);
    }
    let p_slide = out.join("slide_ratios.csv");
    io::write_csv(&p_slide, &["edge_distance", "ratio"], &slide_rows)?;
    mb.add_output(p_slide);
    mb.finish()
}

fn read_pairs(path: &Path, xcol: usize, ycol: usize) -> Result<Vec<(f64, f64)>, CliError> {
    let (_, rows) = io::read_csv(path)?;
    Ok(rows
        .iter()
        .filter(|r| r.len() > xcol.max(ycol))
        .map(|r| (r[xcol], r[ycol]))
        .collect())
}

/// `report`: render SVG plots from CSVs found in the input directory.
/// Pure presentation: no numerical work happens here.
pub fn run_report(
    cfg: &RunConfig,
    input_dir: &str,
    config_path: Option<&str>,
) -> Result<OutputManifest, CliError> {
    let out = ensure_out(cfg)?;
    let mut mb = builder("report", cfg, &out, config_path)?;
    let dir = PathBuf::from(input_dir);
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| CliError::Other(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n.to_string(),
            None => continue,
        };
        if !name.ends_with(".csv") {
            continue;
        }
        let stem = name.trim_end_matches(".csv");
        let svg_path = out.join(format!("{stem}.svg"));
        let svg = if name.starts_with("sigma_") {
            let pts = read_pairs(&path, 0, 1)?;
            Some(line_plot(stem, "y", "sigma", &[Series { name: "sigma".into(), points: pts }], false))
        } else if name == "cond_vs_radius.csv" {
            let (_, rows) = io::read_csv(&path)?;
            let mut depths: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            depths.dedup();
            let series: Vec<Series> = depths
                .iter()
                .map(|&s| Series {
                    name: format!("s={s}"),
                    points: rows
                        .iter()
                        .filter(|r| r[0] == s)
                        .map(|r| (r[1], r[3]))
                        .collect(),
                })
                .collect();
            Some(line_plot(stem, "support radius", "kappa", &series, true))
        } else if name == "cond_full_vs_limited.csv" {
            let full = read_pairs(&path, 0, 1)?;
            let limited = read_pairs(&path, 0, 2)?;
            Some(line_plot(
                stem,
                "s",
                "kappa",
                &[
                    Series { name: "full".into(), points: full },
                    Series { name: "limited".into(), points: limited },
                ],
                true,
            ))
        } else if name == "reconstruction.csv" {
            let truth = read_pairs(&path, 1, 2)?;
            let limited = read_pairs(&path, 1, 3)?;
            let full = read_pairs(&path, 1, 4)?;
            Some(line_plot(
                stem,
                "y",
                "mu",
                &[
                    Series { name: "truth".into(), points: truth },
                    Series { name: "limited".into(), points: limited },
                    Series { name: "full".into(), points: full },
                ],
                false,
            ))
        } else if name == "residuals.csv" {
            let full = read_pairs(&path, 0, 1)?;
            let limited = read_pairs(&path, 0, 2)?;
            Some(line_plot(
                stem,
                "sweep",
                "relative residual",
                &[
                    Series { name: "full".into(), points: full },
                    Series { name: "limited".into(), points: limited },
                ],
                true,
            ))
        } else if name.starts_with("lipschitz_delta") || name == "slide_ratios.csv" {
            let pts = read_pairs(&path, 0, 1)?;
            Some(line_plot(
                stem,
                if name.starts_with("lipschitz") { "T'" } else { "edge distance" },
                "sup ratio",
                &[Series { name: stem.into(), points: pts }],
                true,
            ))
        } else if name == "alpha_curve.csv" {
            let alpha = read_pairs(&path, 0, 1)?;
            let c7 = read_pairs(&path, 0, 2)?;
            Some(line_plot(
                stem,
                "t",
                "value",
                &[
                    Series { name: "alpha".into(), points: alpha },
                    Series { name: "C7".into(), points: c7 },
                ],
                false,
            ))
        } else if name == "energy_identity.csv" {
            let pts = read_pairs(&path, 0, 1)?;
            Some(line_plot(stem, "dt", "max deviation", &[Series { name: "deviation".into(), points: pts }], true))
        } else {
            None
        };
        if let Some(svg) = svg {
            std::fs::write(&svg_path, svg)
                .map_err(|e| CliError::Other(format!("cannot write svg: {e}")))?;
            mb.add_output(svg_path);
        }
    }
    mb.finish()
}
