//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use ghostsim_core::correlation::{
    ObjectSpec, argmax, cgi_expected_image, cgi_sequence_image, correlation_kernel, eq1_terms, fwhm,
    klyshko_psf, normalized_correlation, pgi_ensemble,
};
use ghostsim_core::optics::{ComplexField, PlaneGrid, PropagatorMatrix, apply_propagator, fresnel_propagator, intensity};
use ghostsim_core::photon::{PhotonRunConfig, image_from_histogram, joint_table, sample_pairs, single_photon_cgi};
use ghostsim_core::recon::verify::{check_instance, random_instance};
use ghostsim_core::recon::{Mode, Overrides, parse_config_str, run};
use ghostsim_core::rng::{Domain, keyed_stream, unit_f64};
use ghostsim_core::sources::{PatternId, SourceModel, SourceRealization, mutual_coherence, sample_realization};
use num_complex::Complex64;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn centered(n: usize, pitch: f64) -> PlaneGrid {
    PlaneGrid::centered(n, pitch).unwrap()
}

fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn identity_check() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..100 {
        worst = worst.max(check_instance(&random_instance(2024, i)).map_err(|e| e.to_string())?.max_relative_error);
    }
    ensure(worst <= 1e-10, format!("max relative error {worst:.2e} over 100 instances"))
}

/// Random admissible Fresnel geometry: grid sizes, pitches, offsets and
/// wavelength are drawn, then each distance is set just past the sampling limit.
fn random_arms(index: u64) -> (PropagatorMatrix, PropagatorMatrix) {
    let mut rng = keyed_stream(99, Domain::Verification, index, 0);
    let mut draw = |lo: f64, hi: f64| lo + (hi - lo) * unit_f64(&mut rng);
    let mut grids = Vec::new();
    for _ in 0..3 {
        let n = draw(4.0, 33.0) as usize;
        grids.push(PlaneGrid::new(n, draw(5e-6, 2e-5), draw(-5e-5, 5e-5)).unwrap());
    }
    let src = grids[0];
    let wavelength = draw(4e-7, 8e-7);
    let mut arm = |dst: PlaneGrid| {
        let reach = (dst.center_offset - src.center_offset).abs() + src.half_width() + dst.half_width();
        let need = 2.0 * reach * src.pitch.max(dst.pitch);
        let z = need / wavelength * draw(1.05, 3.0);
        fresnel_propagator(src, dst, wavelength, z).unwrap()
    };
    (arm(grids[1]), arm(grids[2]))
}

fn klyshko_cross_check() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..20 {
        let (g_obj, g_ccd) = random_arms(i);
        let clear = ObjectSpec::uniform(*g_obj.dst());
        let psfs: Vec<ComplexField> = (0..g_obj.rows()).map(|x| klyshko_psf(&g_obj, &g_ccd, x).unwrap()).collect();
        for y in 0..g_ccd.rows() {
            let summed: f64 = psfs.iter().map(|p| p.amplitudes()[y].norm_sqr()).sum();
            let image = eq1_terms(&g_obj, &g_ccd, &clear, y).unwrap().image;
            worst = worst.max((summed - image).abs() / image.abs().max(summed.abs()));
        }
    }
    ensure(worst <= 1e-12, format!("max relative difference {worst:.2e} over 20 geometries"))
}

fn imaging_argmax() -> Outcome {
    let pitch = 20e-6;
    let plane = centered(128, pitch);
    // lambda z = 256 pitch^2 clears the sampling limit of 253 pitch^2
    let g = fresnel_propagator(plane, plane, 500e-9, 256.0 * pitch * pitch / 500e-9).unwrap();
    let kernel = correlation_kernel(&g, &g).unwrap();
    let misses: Vec<usize> = (8..120)
        .filter(|&x| argmax(&kernel[x * 128..(x + 1) * 128]) != Some(x))
        .collect();
    ensure(misses.is_empty(), format!("{} of 112 interior points map off-diagonal {misses:?}", misses.len()))
}

fn diffraction_limit() -> Outcome {
    let wavelength = 500e-9;
    let dst = centered(160, 10e-6);
    let mut worst = 0.0f64;
    for z in [0.5, 0.75, 1.0] {
        for n_s in [64, 96, 128] {
            let src = centered(n_s, 10e-6);
            let g = fresnel_propagator(src, dst, wavelength, z).unwrap();
            let x = 80;
            let psf: Vec<f64> = klyshko_psf(&g, &g, x).unwrap().amplitudes().iter().map(|a| a.norm_sqr()).collect();
            let width = fwhm(&psf, argmax(&psf).unwrap()).ok_or("PSF lobe leaves the grid")? * dst.pitch;
            let deviation = (width / (wavelength * z / src.extent()) - 1.0).abs();
            worst = worst.max(deviation);
        }
    }
    ensure(worst <= 0.2, format!("largest FWHM deviation from lambda z / D: {:.1}%", 100.0 * worst))
}

fn moment_theorem() -> Outcome {
    let (n_s, n_x, n_y) = (8, 24, 20);
    let pitch = 40e-6;
    let g_obj = fresnel_propagator(centered(n_s, pitch), centered(n_x, pitch), 500e-9, 1.0).unwrap();
    let g_ccd = fresnel_propagator(centered(n_s, pitch), centered(n_y, pitch), 500e-9, 1.2).unwrap();
    let model = SourceModel::gaussian(centered(n_s, pitch), 1.0).unwrap();
    let target = mutual_coherence(&model, &g_obj, &g_ccd).unwrap().squared_modulus();
    let shots = 20_000u64;
    let (mut sx, mut sy, mut sxy) = (vec![0.0; n_x], vec![0.0; n_y], vec![0.0; n_x * n_y]);
    for k in 0..shots {
        let e = sample_realization(&model, 5, k).field;
        let ix = intensity(&apply_propagator(&e, &g_obj).unwrap());
        let iy = intensity(&apply_propagator(&e, &g_ccd).unwrap());
        for x in 0..n_x {
            sx[x] += ix[x];
            for y in 0..n_y {
                sxy[x * n_y + y] += ix[x] * iy[y];
            }
        }
        for y in 0..n_y {
            sy[y] += iy[y];
        }
    }
    let r = shots as f64;
    let empirical: Vec<f64> = (0..n_x * n_y)
        .map(|i| sxy[i] / r - sx[i / n_y] / r * sy[i % n_y] / r)
        .collect();
    let err = relative_l2(&empirical, &target);
    ensure(err <= 0.05, format!("relative L2 error {:.2}%", 100.0 * err))
}

/// 64-point planes, pitch p, lambda z = 128 p^2; slits three pixels wide,
/// centered on pixels 20 and 43.
fn slit_geometry() -> (PropagatorMatrix, ObjectSpec, [usize; 2]) {
    let pitch = 40e-6;
    let plane = centered(64, pitch);
    let g = fresnel_propagator(plane, plane, 500e-9, 128.0 * pitch * pitch / 500e-9).unwrap();
    let object = ObjectSpec::double_slit(plane, 3.0 * pitch, 23.0 * pitch).unwrap();
    (g, object, [20, 43])
}

fn pgi_reconstruction() -> Outcome {
    let (g, object, centers) = slit_geometry();
    let model = SourceModel::gaussian(*g.src(), 1.0).unwrap();
    let image = pgi_ensemble(&model, 17, 50_000, &g, &g, &object).map_err(|e| e.to_string())?;
    let cov = &image.covariance;
    let half = cov.len() / 2;
    let peaks = [argmax(&cov[..half]).unwrap(), half + argmax(&cov[half..]).unwrap()];
    let open: Vec<usize> = (0..cov.len()).filter(|&i| object.transmittance()[i].norm() > 0.0).collect();
    let background: Vec<f64> = (0..cov.len())
        .filter(|&i| open.iter().all(|&o| i.abs_diff(o) > 4))
        .map(|i| cov[i])
        .collect();
    let mean_bg = background.iter().sum::<f64>() / background.len() as f64;
    let std_bg = (background.iter().map(|v| (v - mean_bg).powi(2)).sum::<f64>() / background.len() as f64).sqrt();
    let signal = peaks.iter().map(|&p| cov[p]).sum::<f64>() / 2.0;
    let cnr = (signal - mean_bg) / std_bg;
    let located = peaks.iter().zip(centers).all(|(&p, c)| p.abs_diff(c) <= 1);
    ensure(located && cnr >= 5.0, format!("peaks at {peaks:?} (slits at {centers:?}), CNR {cnr:.1}"))
}

fn basis_ensemble() -> Outcome {
    let n = 16;
    let plane = centered(n, 1.0);
    let id = PropagatorMatrix::identity(plane);
    let m: f64 = 2.5;
    let patterns: Vec<SourceRealization> = (0..n)
        .map(|k| SourceRealization {
            field: ComplexField::delta(plane, k).unwrap().scaled(Complex64::new(m.sqrt(), 0.0)),
            pattern_id: PatternId { seed: 0, shot_index: k as u64 },
        })
        .collect();
    let mut rng = keyed_stream(3, Domain::Verification, 0, 0);
    let t: Vec<Complex64> = (0..n)
        .map(|_| Complex64::from_polar(unit_f64(&mut rng), 6.0 * unit_f64(&mut rng)))
        .collect();
    let object = ObjectSpec::new(plane, t.clone()).unwrap();
    let image = cgi_expected_image(&patterns, &id, &id, &object).map_err(|e| e.to_string())?;

    // independent expansion: explicit per-pattern bucket and frame values
    let mut sb = 0.0;
    let mut sy = vec![0.0; n];
    let mut sby = vec![0.0; n];
    for k in 0..n {
        let bucket = m * t[k].norm_sqr();
        sb += bucket;
        sy[k] += m;
        sby[k] += bucket * m;
    }
    let nf = n as f64;
    let expanded: Vec<f64> = (0..n).map(|y| sby[y] / nf - (sb / nf) * (sy[y] / nf)).collect();
    // closed form: (m^2 / n) (|t(y)|^2 - mean |t|^2)
    let mean_t2 = t.iter().map(|v| v.norm_sqr()).sum::<f64>() / nf;
    let closed: Vec<f64> = t.iter().map(|v| m * m / nf * (v.norm_sqr() - mean_t2)).collect();
    let scale = closed.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let err_closed = closed.iter().zip(&expanded).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    let err_image = image.covariance.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;

    // single transmitting point: n cov / m^2 = |t|^2 (1 - 1/n) there
    let x0 = 5;
    let mut only = vec![Complex64::new(0.0, 0.0); n];
    only[x0] = Complex64::new(1.0, 0.0);
    let point = ObjectSpec::new(plane, only).unwrap();
    let single = cgi_expected_image(&patterns, &id, &id, &point).map_err(|e| e.to_string())?;
    let err_point = (single.covariance[x0] * nf / (m * m) - (1.0 - 1.0 / nf)).abs();

    let worst = err_closed.max(err_image).max(err_point);
    ensure(
        worst <= 1e-12,
        format!("closed form vs expansion {err_closed:.1e}, estimator vs closed form {err_image:.1e}, point object {err_point:.1e}"),
    )
}

fn pair_monte_carlo() -> Outcome {
    let pitch = 40e-6;
    let plane = centered(16, pitch);
    let g = fresnel_propagator(plane, plane, 500e-9, 32.0 * pitch * pitch / 500e-9).unwrap();
    // three-pixel slits centered on pixels 4 and 11
    let object = ObjectSpec::double_slit(plane, 3.0 * pitch, 7.0 * pitch).unwrap();
    let table = joint_table(&g, &g, &object).map_err(|e| e.to_string())?;
    let hist = sample_pairs(&table, 1_000_000, 8).map_err(|e| e.to_string())?;
    let tv = hist.total_variation(table.probs());
    let image = image_from_histogram(&hist, &table.singles_reference()).map_err(|e| e.to_string())?;
    let peaks = [argmax(&image.image[..8]).unwrap(), 8 + argmax(&image.image[8..]).unwrap()];
    let separation = peaks[1] - peaks[0];
    ensure(
        tv <= 0.05 && separation.abs_diff(7) <= 1,
        format!("TV {tv:.4}, recovered separation {separation} pixels (true 7)"),
    )
}

fn single_photon() -> Outcome {
    let (g, object, _) = slit_geometry();
    let model = SourceModel::gaussian(*g.src(), 1.0).unwrap();
    let cfg = PhotonRunConfig { shots: 200_000, detection_rate: 0.1, seed: 23 };
    let photon = single_photon_cgi(&model, &g, &g, &object, &cfg).map_err(|e| e.to_string())?;
    let full = cgi_sequence_image(&model, cfg.seed, cfg.shots, &g, &g, &object).map_err(|e| e.to_string())?;
    let r = normalized_correlation(&photon.image.covariance, &full.covariance).unwrap_or(f64::NAN);
    ensure(r >= 0.9, format!("correlation {r:.3} from {} clicks", photon.clicks))
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for mode in Mode::ALL {
        let first = tmp.path().join(format!("{mode}-a"));
        let text = format!(
            r#"{{
                "mode": "{mode}",
                "wavelength": 5e-7,
                "z_object": 0.4,
                "source_grid": {{"n_points": 32, "pitch": 4e-5}},
                "object_grid": {{"n_points": 32, "pitch": 4e-5}},
                "object": {{"builtin": "double-slit", "width": 1.2e-4, "separation": 6e-4}},
                "shots": 5000,
                "seed": 41,
                "instances": 20,
                "out": "{}"
            }}"#,
            first.display()
        );
        let cfg = parse_config_str(&text, tmp.path(), &Overrides::default()).map_err(|e| e.to_string())?;
        run(&cfg).map_err(|e| format!("{mode}: {e}"))?;
        let manifest = fs::read_to_string(first.join("manifest.json")).map_err(|e| e.to_string())?;
        let second = tmp.path().join(format!("{mode}-b"));
        let overrides = Overrides { out: Some(second.clone()), ..Default::default() };
        let again = parse_config_str(&manifest, &first, &overrides).map_err(|e| e.to_string())?;
        run(&again).map_err(|e| format!("{mode} rerun: {e}"))?;
        let (a, b) = (csv_bytes(&first), csv_bytes(&second));
        if a.is_empty() || a != b {
            return Err(format!("{mode}: CSV outputs differ after rerun"));
        }
        checked += a.len();
    }
    Ok(format!("{checked} CSV files byte-identical across {} modes", Mode::ALL.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "factored correlation identity", Duration::from_secs(1), identity_check),
        (2, "Klyshko PSF matches correlation image term", Duration::from_secs(1), klyshko_cross_check),
        (3, "symmetric geometry images x onto y = x", Duration::from_secs(5), imaging_argmax),
        (4, "diffraction-limited PSF width", Duration::from_secs(10), diffraction_limit),
        (5, "Gaussian moment theorem", Duration::from_secs(30), moment_theorem),
        (6, "pseudothermal double-slit reconstruction", Duration::from_secs(60), pgi_reconstruction),
        (7, "standard-basis computational ensemble", Duration::from_secs(60), basis_ensemble),
        (8, "coincidence pair Monte Carlo", Duration::from_secs(30), pair_monte_carlo),
        (9, "single-photon computational imaging", Duration::from_secs(120), single_photon),
        (10, "rerun from manifest", Duration::from_secs(120), reproducibility),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= limit => (true, d),
            Ok(d) => (false, format!("{d}; exceeded {:.0} s", limit.as_secs_f64())),
            Err(d) => (false, d),
        };
        failed += !pass as u32;
        println!(
            "{} criterion {id:>2} {name}: {detail} [{:.2} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
