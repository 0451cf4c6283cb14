//! JSON and CSV writers for run artifacts. Field order and number
//! formatting are deterministic, so identical runs produce byte-identical
//! files.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;

use fsqkd_core::detection::{Bin, DetectionEvent, Detector};
use fsqkd_core::sim::{RunOutput, SweepPoint};

/// Serialize any report value as pretty JSON with a trailing newline.
pub fn to_json<T: serde::Serialize>(value: &T) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(value).context("serializing report")?;
    text.push('\n');
    Ok(text)
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Channel trace CSV: `t_s,transmittance,offset_x_m,offset_y_m`.
pub fn channel_csv(out: &RunOutput) -> String {
    let mut text = String::from("t_s,transmittance,offset_x_m,offset_y_m\n");
    for row in &out.channel_trace {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            row.t_s, row.transmittance, row.offset_x_m, row.offset_y_m
        );
    }
    text
}

/// Tracking trace CSV: `t_s,ex_m,ey_m,ax,ay,eta`.
pub fn tracking_csv(out: &RunOutput) -> String {
    let mut text = String::from("t_s,ex_m,ey_m,ax,ay,eta\n");
    for row in &out.tracking_trace {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            row.t_s, row.ex_m, row.ey_m, row.ax, row.ay, row.eta
        );
    }
    text
}

/// Detection event CSV: `slot,detector,bin,t_ns`.
pub fn events_csv(events: &[DetectionEvent]) -> String {
    let mut text = String::from("slot,detector,bin,t_ns\n");
    for event in events {
        let detector = match event.detector {
            Detector::Z => "z",
            Detector::XOut1 => "x-out1",
            Detector::XOut2 => "x-out2",
        };
        let bin = match event.bin {
            Bin::Early => "early",
            Bin::Central => "central",
            Bin::Late => "late",
        };
        let _ = writeln!(
            text,
            "{},{},{},{}",
            event.slot_index,
            detector,
            bin,
            event.timestamp * 1e9
        );
    }
    text
}

/// Sweep table CSV: `value,mean_skr_bps,mean_qber_z,mean_qber_x,n_z`.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut text = String::from("value,mean_skr_bps,mean_qber_z,mean_qber_x,n_z\n");
    for p in points {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            p.value, p.mean_skr_bps, p.mean_qber_z, p.mean_qber_x, p.n_z
        );
    }
    text
}

/// Write the full artifact set of one run into a directory: `report.json`,
/// `channel.csv`, `tracking.csv`, and the first block's tally as
/// `tally_block0.json` (the input format of `fsqkd keyrate`).
pub fn write_run_artifacts(dir: &Path, out: &RunOutput) -> anyhow::Result<()> {
    write_file(&dir.join("report.json"), &to_json(&out.report)?)?;
    write_file(&dir.join("channel.csv"), &channel_csv(out))?;
    write_file(&dir.join("tracking.csv"), &tracking_csv(out))?;
    if let Some(block) = out.report.blocks.first() {
        write_file(&dir.join("tally_block0.json"), &to_json(&block.tally)?)?;
    }
    Ok(())
}

/// Write one standalone artifact.
pub fn write_text(path: &Path, contents: &str) -> anyhow::Result<()> {
    write_file(path, contents)
}
