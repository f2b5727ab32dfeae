//! Prints detector, gating and cross-validation statistics on synthetic data.
//!
//! cargo run --release --example calibrate -- [images] [thresholds...]

use std::time::Instant;

use fuselage_core::dataset::{group_kfold, Label};
use fuselage_core::image::{partition, to_grayscale};
use fuselage_core::pipeline::{cross_validate, truth_labels, PipelineConfig};
use fuselage_core::surf::{detect, gate_mask, DetectorParams};
use fuselage_core::synth::{generate_dataset, SynthConfig};

fn main() -> fuselage_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(30, |a| a.parse().unwrap());
    let thresholds: Vec<f64> = args.iter().skip(1).map(|a| a.parse().unwrap()).collect();
    let t = Instant::now();
    let samples = generate_dataset(&SynthConfig::default(), n)?;
    println!("generated {n} images in {:.2}s", t.elapsed().as_secs_f64());

    let cfg = PipelineConfig::default();
    let mut defect_patches = 0;
    let mut total = 0;
    for s in &samples {
        let grid = partition(s.image.width(), s.image.height(), cfg.patch_size)?;
        let truth = truth_labels(&s.mask, &grid)?;
        defect_patches += truth.iter().filter(|l| **l == Label::Defect).count();
        total += truth.len();
    }
    println!("defect patches {defect_patches}/{total} ({:.3})", defect_patches as f64 / total as f64);

    for &th in &thresholds {
        for step in [1usize, 2, 4] {
            let params = DetectorParams {
                threshold: th,
                init_step: step,
                ..DetectorParams::default()
            };
            let (mut hit, mut pos, mut sel, mut tot, mut secs, mut kps) = (0, 0, 0, 0, 0.0, 0);
            for s in &samples {
                let gray = to_grayscale(&s.image);
                let grid = partition(gray.width(), gray.height(), cfg.patch_size)?;
                let t = Instant::now();
                let k = detect(&gray, &params)?;
                secs += t.elapsed().as_secs_f64();
                kps += k.len();
                let gate = gate_mask(&grid, &k);
                let truth = truth_labels(&s.mask, &grid)?;
                for (g, l) in gate.iter().zip(&truth) {
                    pos += l.is_defect() as usize;
                    hit += (*g && l.is_defect()) as usize;
                    sel += *g as usize;
                }
                tot += grid.len();
            }
            println!(
                "th {th:>8} step {step}: recall {:.3} selected {:.3} keypoints/img {:.0} detect {:.1} ms/img",
                hit as f64 / pos as f64,
                sel as f64 / tot as f64,
                kps as f64 / n as f64,
                1e3 * secs / n as f64
            );
        }
    }

    if thresholds.is_empty() {
        let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
        let plan = group_kfold(&ids, 10.min(n), cfg.seed)?;
        let t = Instant::now();
        let report = cross_validate(&samples, &plan, &cfg, None)?;
        print!("{}", report.to_table());
        println!("cv in {:.2}s", t.elapsed().as_secs_f64());
    }
    Ok(())
}
