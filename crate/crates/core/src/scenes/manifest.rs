use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BlurMeta, SceneDataset, View};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Camera};
use crate::raster::Image;
use crate::vec3::{Mat3, Vec3};

pub const MANIFEST_HEADER: &str = "pdrf-manifest v1";
pub const MANIFEST_FILE: &str = "manifest.txt";

fn num(out: &mut String, v: f64) {
    let _ = write!(out, " {v:.16e}");
}

fn manifest_text(ds: &SceneDataset) -> String {
    let mut s = String::new();
    s.push_str(MANIFEST_HEADER);
    s.push('\n');
    s.push_str("bounds");
    for v in ds.bounds.min.0.iter().chain(&ds.bounds.max.0) {
        num(&mut s, *v);
    }
    s.push_str("\ndepth");
    num(&mut s, ds.near);
    num(&mut s, ds.far);
    s.push('\n');
    for view in &ds.views {
        s.push_str(&view.name);
        let c = &view.camera;
        for r in 0..3 {
            for k in 0..3 {
                num(&mut s, c.rotation.0[r][k]);
            }
            num(&mut s, c.origin[r]);
        }
        num(&mut s, c.focal);
        num(&mut s, c.cx);
        num(&mut s, c.cy);
        match &view.blur {
            BlurMeta::None => s.push_str(" none"),
            BlurMeta::HeldOut => s.push_str(" heldout"),
            BlurMeta::Motion { shift, steps } => {
                s.push_str(" motion");
                for v in shift.0 {
                    num(&mut s, v);
                }
                let _ = write!(s, " {steps}");
            }
            BlurMeta::Defocus {
                aperture,
                focus_depth,
                lens_samples,
            } => {
                s.push_str(" defocus");
                num(&mut s, *aperture);
                num(&mut s, *focus_depth);
                let _ = write!(s, " {lens_samples}");
            }
        }
        s.push('\n');
    }
    s
}

/// Writes `manifest.txt` plus one PNG per view into `dir`: 8-bit for
/// training views, 16-bit for held-out views.
pub fn write_manifest(ds: &SceneDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for view in &ds.views {
        let path = dir.join(&view.name);
        if view.blur.is_heldout() {
            view.image.save_png16(&path)?;
        } else {
            view.image.save_png8(&path)?;
        }
    }
    fs::write(dir.join(MANIFEST_FILE), manifest_text(ds))?;
    Ok(())
}

struct Fields<'a> {
    path: &'a Path,
    line: usize,
    items: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.into(),
        }
    }

    fn word(&mut self, what: &str) -> Result<&'a str> {
        self.items
            .next()
            .ok_or_else(|| self.err(format!("missing {what}")))
    }

    fn float(&mut self, what: &str) -> Result<f64> {
        let w = self.word(what)?;
        w.parse()
            .map_err(|_| self.err(format!("bad {what} `{w}`")))
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let w = self.word(what)?;
        w.parse()
            .map_err(|_| self.err(format!("bad {what} `{w}`")))
    }

    fn finish(mut self) -> Result<()> {
        match self.items.next() {
            Some(extra) => Err(self.err(format!("unexpected field `{extra}`"))),
            None => Ok(()),
        }
    }
}

/// Reads a dataset written by [`write_manifest`].
pub fn read_manifest(dir: &Path) -> Result<SceneDataset> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let text = fs::read_to_string(&path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let parse_err = |line, message: &str| Error::Parse {
        path: path.clone(),
        line,
        message: message.to_string(),
    };
    match lines.next() {
        Some((_, l)) if l.trim() == MANIFEST_HEADER => {}
        Some((n, _)) => return Err(parse_err(n, "expected header `pdrf-manifest v1`")),
        None => return Err(parse_err(1, "empty manifest")),
    }

    let mut bounds = None;
    let mut range = None;
    let mut views = Vec::new();
    for (line, text) in lines {
        let mut f = Fields {
            path: &path,
            line,
            items: text.split_whitespace(),
        };
        let head = f.word("name")?;
        match head {
            "bounds" => {
                let mut v = [0.0; 6];
                for x in &mut v {
                    *x = f.float("bound")?;
                }
                f.finish()?;
                bounds = Some(Aabb::new(
                    Vec3::new(v[0], v[1], v[2]),
                    Vec3::new(v[3], v[4], v[5]),
                ));
            }
            "depth" => {
                let near = f.float("near")?;
                let far = f.float("far")?;
                f.finish()?;
                if !(near >= 0.0 && far > near) {
                    return Err(parse_err(line, "depth range must satisfy 0 <= near < far"));
                }
                range = Some((near, far));
            }
            name => {
                let mut rot = [[0.0; 3]; 3];
                let mut origin = Vec3::zero();
                for r in 0..3 {
                    for k in 0..3 {
                        rot[r][k] = f.float("pose value")?;
                    }
                    origin[r] = f.float("pose value")?;
                }
                let focal = f.float("fx")?;
                let cx = f.float("cx")?;
                let cy = f.float("cy")?;
                let blur = match f.word("blur type")? {
                    "none" => BlurMeta::None,
                    "heldout" => BlurMeta::HeldOut,
                    "motion" => {
                        let shift = Vec3::new(
                            f.float("shift")?,
                            f.float("shift")?,
                            f.float("shift")?,
                        );
                        BlurMeta::Motion {
                            shift,
                            steps: f.count("steps")?,
                        }
                    }
                    "defocus" => BlurMeta::Defocus {
                        aperture: f.float("aperture")?,
                        focus_depth: f.float("focus depth")?,
                        lens_samples: f.count("lens samples")?,
                    },
                    other => return Err(f.err(format!("unknown blur type `{other}`"))),
                };
                f.finish()?;
                let image = Image::load_png(&dir.join(name))?;
                views.push(View {
                    name: name.to_string(),
                    camera: Camera {
                        rotation: Mat3(rot),
                        origin,
                        focal,
                        cx,
                        cy,
                        width: image.width,
                        height: image.height,
                    },
                    blur,
                    image,
                });
            }
        }
    }
    let last = text.lines().count().max(1);
    let bounds = bounds.ok_or_else(|| parse_err(last, "missing `bounds` line"))?;
    let (near, far) = range.ok_or_else(|| parse_err(last, "missing `depth` line"))?;
    Ok(SceneDataset {
        bounds,
        near,
        far,
        views,
    })
}
