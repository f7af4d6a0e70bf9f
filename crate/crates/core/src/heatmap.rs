//! Portable graymap renderings of per-state quantities.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridMap;

/// An 8-bit grayscale image, one pixel per grid cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Graymap {
    pub fn pixel(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Binary `P5` encoding.
    pub fn to_p5(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Plain-text `P2` encoding.
    pub fn to_p2(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Writes `P2` if the extension is `.pgm2` or `.txt`, `P5` otherwise.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let plain = matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("pgm2") | Some("txt")
        );
        let mut f = std::fs::File::create(path)?;
        if plain {
            f.write_all(self.to_p2().as_bytes())?;
        } else {
            f.write_all(&self.to_p5())?;
        }
        Ok(())
    }

    /// Parses `P2` or `P5` data with maxval 255.
    pub fn parse(bytes: &[u8]) -> Result<Graymap> {
        let bad = |m: &str| Error::format("<pgm>", m);
        let mut fields = Vec::new();
        let mut i = 0;
        while fields.len() < 4 && i < bytes.len() {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
        }
        if fields.len() < 4 {
            return Err(bad("truncated header"));
        }
        let width: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
        let height: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
        if fields[3] != "255" {
            return Err(bad("maxval must be 255"));
        }
        let pixels = match fields[0].as_str() {
            "P5" => {
                let data = bytes.get(i + 1..).ok_or_else(|| bad("missing raster"))?;
                if data.len() < width * height {
                    return Err(bad("short raster"));
                }
                data[..width * height].to_vec()
            }
            "P2" => String::from_utf8_lossy(&bytes[i..])
                .split_whitespace()
                .map(|t| t.parse::<u8>().map_err(|_| bad("bad pixel")))
                .collect::<Result<Vec<u8>>>()?,
            _ => return Err(bad("unknown magic")),
        };
        if pixels.len() != width * height {
            return Err(bad("raster size mismatch"));
        }
        Ok(Graymap {
            width,
            height,
            pixels,
        })
    }
}

/// Visitation heatmap: free cells get `255 · log(1+c) / log(1+max c)`,
/// walls are 0. All-zero counts give an all-black image.
pub fn render_heatmap(counts: &[u64], map: &GridMap) -> Result<Graymap> {
    if counts.len() != map.num_states() {
        return Err(Error::Config(format!(
            "{} counts for {} states",
            counts.len(),
            map.num_states()
        )));
    }
    let logs: Vec<f64> = counts.iter().map(|&c| (c as f64).ln_1p()).collect();
    Ok(paint(map, &logs))
}

/// Linear rendering of a nonnegative per-state quantity (e.g. SR L1 norms).
pub fn render_values(values: &[f64], map: &GridMap) -> Result<Graymap> {
    if values.len() != map.num_states() {
        return Err(Error::Config(format!(
            "{} values for {} states",
            values.len(),
            map.num_states()
        )));
    }
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    Ok(paint(map, &clipped))
}

/// Sub-goal map: walls 0, free cells 96, marked states 255.
pub fn render_subgoals(marked: &[usize], map: &GridMap) -> Graymap {
    let mut img = blank(map);
    for s in 0..map.num_states() {
        let (r, c) = map.cell(s);
        img.pixels[r * map.width() + c] = 96;
    }
    for &s in marked {
        if s < map.num_states() {
            let (r, c) = map.cell(s);
            img.pixels[r * map.width() + c] = 255;
        }
    }
    img
}

fn blank(map: &GridMap) -> Graymap {
    Graymap {
        width: map.width(),
        height: map.height(),
        pixels: vec![0; map.width() * map.height()],
    }
}

fn paint(map: &GridMap, values: &[f64]) -> Graymap {
    let mut img = blank(map);
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return img;
    }
    for (s, &v) in values.iter().enumerate() {
        let (r, c) = map.cell(s);
        img.pixels[r * map.width() + c] = (255.0 * v / max).round().clamp(0.0, 255.0) as u8;
    }
    img
}

/// Fraction of total visits landing within shortest-path distance `radius`
/// of any state in `centers`. Zero when nothing was visited.
pub fn mass_near(counts: &[u64], map: &GridMap, centers: &[usize], radius: usize) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let mut near = vec![false; map.num_states()];
    for &c in centers {
        for (s, d) in map.distances_from(c).into_iter().enumerate() {
            if d.is_some_and(|d| d <= radius) {
                near[s] = true;
            }
        }
    }
    let inside: u64 = counts.iter().zip(&near).filter(|(_, &n)| n).map(|(c, _)| c).sum();
    inside as f64 / total as f64
}

/// Counts file: one nonnegative integer per line, in state order.
pub fn read_counts(path: impl AsRef<Path>) -> Result<Vec<u64>> {
    let path = path.as_ref();
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn write_counts(path: impl AsRef<Path>, counts: &[u64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for c in counts {
        writeln!(out, "{c}")?;
    }
    out.flush()?;
    Ok(())
}
