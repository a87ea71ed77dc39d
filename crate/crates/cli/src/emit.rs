use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use salem_core::spectral::DecayFit;
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::BUILD;

/// Writes the artifacts of one run under `<out>/<command>-<seed>-<hash>.<ext>`.
pub struct Emitter<'a> {
    cfg: &'a RunConfig,
    written: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    pub fn new(cfg: &'a RunConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        Ok(Emitter {
            cfg,
            written: Vec::new(),
        })
    }

    pub fn into_paths(self) -> Vec<PathBuf> {
        self.written
    }

    fn write(&mut self, ext: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.cfg.out.join(format!("{}.{ext}", self.cfg.stem()));
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    fn config_json(&self) -> String {
        serde_json::to_string(self.cfg).expect("config serializes")
    }

    /// The JSON document: schema version, build, config, verdict and result.
    pub fn json<T: Serialize>(&mut self, passed: bool, result: &T) -> anyhow::Result<()> {
        if !self.cfg.wants(Format::Json) {
            return Ok(());
        }
        let doc = serde_json::json!({
            "schema": 1,
            "command": self.cfg.command.name(),
            "build": BUILD,
            "config": self.cfg,
            "passed": passed,
            "result": result,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write("json", text.as_bytes())
    }

    /// CSV body produced by `body`, preceded by a `#` line holding the config.
    pub fn csv(
        &mut self,
        body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> anyhow::Result<()> {
        if !self.cfg.wants(Format::Csv) {
            return Ok(());
        }
        let mut buf = Vec::new();
        writeln!(buf, "# {}", self.config_json())?;
        body(&mut buf)?;
        self.write("csv", &buf)
    }

    pub fn svg(
        &mut self,
        title: &str,
        points: &[(f64, f64)],
        fit: Option<&DecayFit>,
    ) -> anyhow::Result<()> {
        if !self.cfg.wants(Format::Svg) {
            return Ok(());
        }
        let svg = decay_svg(title, &self.config_json(), points, fit);
        self.write("svg", svg.as_bytes())
    }

    /// An artifact outside the csv/json/svg set, written whatever the formats.
    pub fn extra(&mut self, ext: &str, bytes: &[u8]) -> anyhow::Result<()> {
        self.write(ext, bytes)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;

fn decades(values: impl Iterator<Item = f64>) -> (i32, i32) {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .map(f64::log10)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return (0, 1);
    }
    let (lo, hi) = (lo.floor() as i32, hi.ceil() as i32);
    (lo, if hi > lo { hi } else { lo + 1 })
}

/// Log-log panel of envelope points with the fitted power law and its exponent.
pub fn decay_svg(
    title: &str,
    metadata: &str,
    points: &[(f64, f64)],
    fit: Option<&DecayFit>,
) -> String {
    let line: Vec<(f64, f64)> = fit
        .map(|f| {
            let (a, b) = (f.u_range.0.max(f64::MIN_POSITIVE), f.u_range.1);
            [a, b]
                .iter()
                .map(|&u| (u, (f.intercept - f.exponent * u.ln()).exp()))
                .collect()
        })
        .unwrap_or_default();
    let (x0, x1) = decades(points.iter().chain(&line).map(|p| p.0));
    let (y0, y1) = decades(points.iter().chain(&line).map(|p| p.1));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x.log10() - x0 as f64) / (x1 - x0) as f64 * pw;
    let py = |y: f64| TOP + (y1 as f64 - y.log10()) / (y1 - y0) as f64 * ph;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    s.push_str(&format!("<metadata>{}</metadata>\n", escape(metadata)));
    s.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    s.push_str(&format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    for k in x0..=x1 {
        let x = px(10f64.powi(k));
        s.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#ccc\"/>\n<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">1e{k}</text>\n",
            TOP,
            TOP + ph,
            TOP + ph + 16.0
        ));
    }
    for k in y0..=y1 {
        let y = py(10f64.powi(k));
        s.push_str(&format!(
            "<line x1=\"{LEFT:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ccc\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e{k}</text>\n",
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">u</text>\n",
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">block sup |transform|</text>\n",
        TOP + ph / 2.0,
        TOP + ph / 2.0
    ));
    for &(x, y) in points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0) {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"#1f5fa8\"/>\n",
            px(x),
            py(y)
        ));
    }
    if let (Some(f), [a, b]) = (fit, line.as_slice()) {
        s.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n",
            px(a.0),
            py(a.1),
            px(b.0),
            py(b.1)
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#c0392b\">exponent {:.4}, r² {:.3}</text>\n",
            LEFT + pw - 8.0,
            TOP + 18.0,
            f.exponent,
            f.r_squared
        ));
    }
    s.push_str("</svg>\n");
    s
}
