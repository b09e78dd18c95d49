use std::path::Path;

use abip::io::save_checkpoint;
use abip::tasks::{run_denoise_experiment, DenoiseConfig, DenoiseReport, Method, MultispectralImage, Psnr};
use abip::ProductRegistry;
use serde::Serialize;

use crate::config;
use crate::failure::{write_output, CmdResult, Failure};
use crate::train::{history_csv, timing_csv, versions, Versions};

#[derive(Serialize)]
struct DenoiseManifest<'a> {
    command: &'static str,
    config: &'a DenoiseConfig,
    seed: u64,
    versions: Versions,
    report: &'a str,
}

fn output_stem(method: Method, index: usize, networks: usize) -> String {
    if networks > 1 {
        format!("{}_b{:02}", method.as_str(), index + 1)
    } else {
        method.as_str().to_string()
    }
}

fn dump_bands(img: &MultispectralImage, prefix: &str, out: &Path) -> CmdResult {
    for b in 0..img.bands() {
        let path = out.join(format!("{prefix}_b{:02}.pgm", b + 1));
        img.write_pgm(b, &path).map_err(|e| Failure::data_at(&path, e))?;
    }
    Ok(())
}

fn fmt_psnr(p: Psnr) -> String {
    match p {
        Psnr::Decibels(db) => format!("{db:.2} dB"),
        Psnr::Identical => "identical".into(),
    }
}

pub fn cmd_denoise(
    config_path: &Path,
    overrides: &[String],
    baselines: Option<&[Method]>,
    dump_images: bool,
    out: &Path,
) -> CmdResult {
    let mut cfg = config::load::<DenoiseConfig>(config_path, "denoise", overrides)?.config;
    if let Some(b) = baselines {
        cfg.baselines = b.to_vec();
    }
    cfg.reconstruct_images |= dump_images;

    let outcome = run_denoise_experiment(&cfg, &ProductRegistry::new())?;
    let mut report: DenoiseReport = outcome.report;
    for (m, (method, nets)) in report.methods.iter_mut().zip(&outcome.networks) {
        for (i, (net, history)) in nets.iter().zip(&m.histories).enumerate() {
            let stem = output_stem(*method, i, nets.len());
            let csv = format!("history_{stem}.csv");
            write_output(&out.join(&csv), history_csv(history))?;
            write_output(&out.join(format!("timing_{stem}.csv")), timing_csv(history))?;
            let ckpt = out.join(format!("{stem}.abip"));
            save_checkpoint(net, &ckpt).map_err(|e| Failure::data_at(&ckpt, e))?;
            m.history_csv.push(csv);
        }
    }
    if dump_images {
        dump_bands(&outcome.clean, "clean", out)?;
        dump_bands(&outcome.noisy, "noisy", out)?;
        if let Some(d) = &outcome.denoised {
            dump_bands(d, "denoised", out)?;
        }
    }
    write_output(&out.join("report.json"), serde_json::to_string_pretty(&report).unwrap())?;
    let manifest = DenoiseManifest {
        command: "denoise",
        config: &cfg,
        seed: cfg.train.seed,
        versions: versions(),
        report: "report.json",
    };
    write_output(&out.join("manifest.json"), serde_json::to_string_pretty(&manifest).unwrap())?;

    println!("noisy input       {}", fmt_psnr(report.psnr_noisy));
    if report.degenerate {
        println!("noise-free input: denoising is degenerate, nothing trained");
    }
    for m in &report.methods {
        println!(
            "{:<17} {}  ({} params, {} epochs{})",
            m.method.as_str(),
            fmt_psnr(m.psnr),
            m.param_count,
            m.epochs_run,
            if m.diverged { ", diverged" } else { "" }
        );
    }
    if report.methods.iter().any(|m| m.method == Method::Abipnn && m.diverged) {
        return Err(Failure::Numeric(anyhow::anyhow!("ABIPNN training diverged")));
    }
    Ok(())
}
