use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use qcav_core::PhaseGrid;

/// Shortest round-trip decimal. Plain notation in `[1e-4, 1e16)`, scientific
/// outside; integral values keep a trailing `.0`.
pub fn format_f64(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        return format!("{v:e}");
    }
    let s = v.to_string();
    if s.contains('.') {
        s
    } else {
        s + ".0"
    }
}

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            self.buf.push_str(&format_f64(*v));
        }
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

/// ASCII `P2` image of the grid; top row is the largest imaginary part.
/// `pixel = round(255 v / v_max)`, negative values clamp to 0.
pub fn pgm(grid: &PhaseGrid) -> String {
    let (nr, ni) = grid.values.dim();
    let vmax = grid.max();
    let mut out = format!("P2\n{nr} {ni}\n255\n");
    for j in (0..ni).rev() {
        let row: Vec<String> = (0..nr)
            .map(|i| {
                let v = grid.values[[i, j]];
                let px = if vmax > 0.0 { (255.0 * v / vmax).round().clamp(0.0, 255.0) } else { 0.0 };
                (px as u8).to_string()
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
