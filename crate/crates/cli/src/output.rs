//! File writers. Every artifact carries the config hash: a `config_hash`
//! field in JSON, a `# config_hash=` footer in CSV and text records, and a
//! comment in SVG.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn json_string<T: Serialize>(body: &T, hash: &str) -> String {
    serde_json::to_string_pretty(&Stamped { config_hash: hash, body }).expect("result serializes")
}

pub struct Writer {
    dir: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, hash: &str) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), hash: hash.to_string(), written: Vec::new() })
    }

    fn put(&mut self, name: &str, contents: &str) -> io::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> io::Result<String> {
        let text = json_string(body, &self.hash);
        self.put(name, &format!("{text}\n"))?;
        Ok(text)
    }

    /// CSV or plain-text record with the hash as a trailing comment line.
    pub fn text(&mut self, name: &str, body: &str) -> io::Result<()> {
        let mut s = body.to_string();
        if !s.ends_with('\n') {
            s.push('\n');
        }
        writeln!(s, "# config_hash={}", self.hash).expect("string write");
        self.put(name, &s)
    }

    pub fn svg(&mut self, name: &str, plot: &Plot) -> io::Result<()> {
        let svg = plot.render(&self.hash);
        self.put(name, &svg)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
}

/// A line chart with axes, five ticks per axis and a legend.
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
}

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    fn sx(&self, x: f64) -> f64 {
        let (a, b) = self.x_range;
        LEFT + (x - a) / (b - a) * (WIDTH - LEFT - RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        let (a, b) = self.y_range;
        HEIGHT - BOTTOM - (y - a) / (b - a) * (HEIGHT - TOP - BOTTOM)
    }

    pub fn render(&self, hash: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, "<!-- config_hash={hash} -->");
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, escape(&self.title));

        let (x0, x1) = (self.sx(self.x_range.0), self.sx(self.x_range.1));
        let (y0, y1) = (self.sy(self.y_range.0), self.sy(self.y_range.1));
        let _ = writeln!(s, r#"<g stroke="black" stroke-width="1"><line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/></g>"#);
        for i in 0..=5 {
            let t = i as f64 / 5.0;
            let xv = self.x_range.0 + t * (self.x_range.1 - self.x_range.0);
            let yv = self.y_range.0 + t * (self.y_range.1 - self.y_range.0);
            let (px, py) = (self.sx(xv), self.sy(yv));
            let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 5.0, y0 + 18.0, tick(xv));
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 5.0, x0 - 8.0, py + 4.0, tick(yv));
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0, escape(&self.x_label));
        let _ = writeln!(s, r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#, (y0 + y1) / 2.0, escape(&self.y_label));

        for (i, series) in self.series.iter().enumerate() {
            let pts: Vec<String> = series.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.sx(x), self.sy(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, series.color, pts.join(" "));
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = WIDTH - RIGHT + 15.0;
            let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#, lx + 20.0, series.color, lx + 26.0, ly + 4.0, escape(&series.label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() >= 1.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
