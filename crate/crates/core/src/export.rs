//! Text artifacts: fixed-precision numbers, CSV and SVG.

use std::fmt::Write;

/// Formats a float with 12 significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

/// Rounds every float in a JSON value to 12 significant digits.
pub fn round_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if !n.is_i64() && !n.is_u64() {
                    let r: f64 = format!("{f:.11e}").parse().unwrap_or(f);
                    if let Some(m) = serde_json::Number::from_f64(r) {
                        *n = m;
                    }
                }
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_json),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Pretty JSON with rounded floats; non-finite floats become `null`.
pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
    round_json(&mut v);
    serde_json::to_string_pretty(&v).unwrap_or_default()
}

/// Prefixes every line of `text` with `# `.
pub fn comment_header(text: &str) -> String {
    text.lines().map(|l| format!("# {l}\n")).collect()
}

pub const VIEWPORT: f64 = 800.0;

/// Minimal SVG canvas mapping a data rectangle onto an 800×800 viewport.
pub struct Svg {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    body: String,
}

impl Svg {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self {
            x0,
            x1,
            y0,
            y1,
            body: String::new(),
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let m = 40.0;
        let w = VIEWPORT - 2.0 * m;
        (
            m + (x - self.x0) / (self.x1 - self.x0) * w,
            VIEWPORT - m - (y - self.y0) / (self.y1 - self.y0) * w,
        )
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.body, "<!--\n{}\n-->", text.replace("--", "- -"));
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (a, b) = self.map(x, y);
                format!("{a:.2},{b:.2}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\" points=\"{}\"/>",
            coords.join(" ")
        );
    }

    /// Polyline split wherever consecutive points jump by more than `jump`
    /// (chart seams).
    pub fn path_with_breaks(&mut self, pts: &[(f64, f64)], jump: f64, color: &str, width: f64) {
        let mut run: Vec<(f64, f64)> = Vec::new();
        for &p in pts {
            if let Some(&q) = run.last() {
                if (p.0 - q.0).hypot(p.1 - q.1) > jump {
                    self.polyline(&run, color, width);
                    run.clear();
                }
            }
            run.push(p);
        }
        self.polyline(&run, color, width);
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, color: &str) {
        let (a, b) = self.map(x, y);
        let _ = writeln!(self.body, "<circle cx=\"{a:.2}\" cy=\"{b:.2}\" r=\"{r}\" fill=\"{color}\"/>");
    }

    pub fn hline(&mut self, y: f64, color: &str) {
        self.polyline(&[(self.x0, y), (self.x1, y)], color, 1.0);
    }

    pub fn vline(&mut self, x: f64, color: &str) {
        self.polyline(&[(x, self.y0), (x, self.y1)], color, 1.0);
    }

    pub fn text(&mut self, x: f64, y: f64, label: &str) {
        let (a, b) = self.map(x, y);
        let _ = writeln!(
            self.body,
            "<text x=\"{a:.2}\" y=\"{b:.2}\" font-size=\"14\" font-family=\"monospace\">{}</text>",
            label.replace('&', "&amp;").replace('<', "&lt;")
        );
    }

    pub fn frame(&mut self) {
        let pts = [
            (self.x0, self.y0),
            (self.x1, self.y0),
            (self.x1, self.y1),
            (self.x0, self.y1),
            (self.x0, self.y0),
        ];
        self.polyline(&pts, "#888", 1.0);
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{v}\" height=\"{v}\" viewBox=\"0 0 {v} {v}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            v = VIEWPORT
        )
    }
}
