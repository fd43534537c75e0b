//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `PSAV`, version u32, section count u32, then
//! one table entry per section (tag `[u8; 4]`, offset u64, length u64), then
//! the section payloads. Offsets are absolute. See `docs/formats.md`.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::math::Quat;
use crate::morphable::TemplateModel;
use crate::psm::{PsmCloud, SurfaceSample};
use crate::splat::sh::{num_coeffs, MAX_SH_DEGREE};
use crate::splat::{GaussianPrimitive, GaussianSet};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PSAV";
pub const CHECKPOINT_VERSION: u32 = 1;

const TAG_META: [u8; 4] = *b"META";
const TAG_PSM: [u8; 4] = *b"PSM ";
const TAG_GAUS: [u8; 4] = *b"GAUS";
const TAG_CORR: [u8; 4] = *b"CORR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Shape,
    Appearance,
}

impl Stage {
    fn code(self) -> u8 {
        match self {
            Stage::Shape => 0,
            Stage::Appearance => 1,
        }
    }
}

/// Everything needed to render a trained avatar, given its template.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub stage: Stage,
    pub seed: u64,
    /// Resolved configuration of the run that produced this state (JSON).
    pub config: String,
    /// Trained samples. For appearance checkpoints these are the Gaussians'
    /// bindings.
    pub cloud: PsmCloud,
    /// Present exactly for appearance checkpoints.
    pub gaussians: Option<GaussianSet>,
    pub corrective_pose: Vec<f64>,
    pub corrective_expr: Vec<f64>,
}

impl Checkpoint {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Checkpoint(m));
        match (&self.stage, &self.gaussians) {
            (Stage::Shape, Some(_)) => return bad("shape checkpoint carries Gaussians".into()),
            (Stage::Appearance, None) => return bad("appearance checkpoint without Gaussians".into()),
            (_, Some(set)) => {
                if set.len() != self.cloud.len() {
                    return bad(format!("{} Gaussians for {} samples", set.len(), self.cloud.len()));
                }
                if set.prims.iter().zip(&self.cloud.samples).any(|(g, s)| g.base != *s) {
                    return bad("Gaussian bindings differ from the stored samples".into());
                }
                if set.sh_degree > MAX_SH_DEGREE {
                    return bad(format!("SH degree {}", set.sh_degree));
                }
            }
            _ => {}
        }
        for (i, s) in self.cloud.samples.iter().enumerate() {
            let sum: f64 = s.bary.iter().sum();
            if s.bary.iter().any(|b| !(*b >= -1e-9)) || (sum - 1.0).abs() > 1e-6 {
                return bad(format!("sample {i} has invalid barycentrics {:?}", s.bary));
            }
            if !(s.offset >= 0.0 && s.offset <= self.cloud.l_max + 1e-12) {
                return bad(format!(
                    "sample {i} offset {} outside [0, {}]",
                    s.offset, self.cloud.l_max
                ));
            }
            if !s.opacity_raw.is_finite() || s.color.iter().any(|c| !c.is_finite()) {
                return bad(format!("sample {i} has non-finite attributes"));
            }
        }
        if !(self.cloud.radius > 0.0) {
            return bad(format!("point radius {} must be positive", self.cloud.radius));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut sections: Vec<([u8; 4], Vec<u8>)> = vec![(TAG_META, self.meta_bytes()), (TAG_PSM, self.psm_bytes())];
        if let Some(set) = &self.gaussians {
            sections.push((TAG_GAUS, gaussian_bytes(set)));
        }
        sections.push((TAG_CORR, self.corr_bytes()));

        let header_len = 4 + 4 + 4 + sections.len() * 20;
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.write_u32::<LE>(CHECKPOINT_VERSION).expect("vec write");
        out.write_u32::<LE>(sections.len() as u32).expect("vec write");
        let mut offset = header_len as u64;
        for (tag, body) in &sections {
            out.extend_from_slice(tag);
            out.write_u64::<LE>(offset).expect("vec write");
            out.write_u64::<LE>(body.len() as u64).expect("vec write");
            offset += body.len() as u64;
        }
        for (_, body) in sections {
            out.extend_from_slice(&body);
        }
        Ok(out)
    }

    fn meta_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.write_u8(self.stage.code()).expect("vec write");
        b.write_u64::<LE>(self.seed).expect("vec write");
        b.write_u64::<LE>(self.config.len() as u64).expect("vec write");
        b.extend_from_slice(self.config.as_bytes());
        b
    }

    fn psm_bytes(&self) -> Vec<u8> {
        let c = &self.cloud;
        let mut b = Vec::with_capacity(32 + c.len() * 68);
        b.write_u64::<LE>(c.len() as u64).expect("vec write");
        b.write_f64::<LE>(c.l_max).expect("vec write");
        b.write_f64::<LE>(c.radius).expect("vec write");
        b.write_u64::<LE>(c.seed).expect("vec write");
        for s in &c.samples {
            b.write_u32::<LE>(s.face_index).expect("vec write");
            for v in s.bary.iter().chain([&s.offset, &s.opacity_raw]).chain(&s.color) {
                b.write_f64::<LE>(*v).expect("vec write");
            }
        }
        b
    }

    fn corr_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        for basis in [&self.corrective_pose, &self.corrective_expr] {
            b.write_u64::<LE>(basis.len() as u64).expect("vec write");
            for v in basis.iter() {
                b.write_f64::<LE>(*v).expect("vec write");
            }
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = |_| Error::Truncated {
            section: "header".into(),
        };
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(header)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = r.read_u32::<LE>().map_err(header)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        let count = r.read_u32::<LE>().map_err(header)?;
        let mut table = Vec::new();
        for _ in 0..count {
            let mut tag = [0u8; 4];
            r.read_exact(&mut tag).map_err(header)?;
            let off = r.read_u64::<LE>().map_err(header)?;
            let len = r.read_u64::<LE>().map_err(header)?;
            table.push((tag, off, len));
        }
        let section = |tag: [u8; 4]| -> Result<Option<Section<'_>>> {
            let Some(&(_, off, len)) = table.iter().find(|e| e.0 == tag) else {
                return Ok(None);
            };
            let name = tag_name(tag);
            let end = off.checked_add(len).filter(|e| *e <= bytes.len() as u64);
            match end {
                Some(end) => Ok(Some(Section {
                    name,
                    r: Cursor::new(&bytes[off as usize..end as usize]),
                })),
                None => Err(Error::Truncated { section: name }),
            }
        };
        let required =
            |tag| section(tag)?.ok_or_else(|| Error::Checkpoint(format!("missing section {}", tag_name(tag))));

        let mut meta = required(TAG_META)?;
        let stage = match meta.u8()? {
            0 => Stage::Shape,
            1 => Stage::Appearance,
            other => return Err(Error::Checkpoint(format!("unknown stage code {other}"))),
        };
        let seed = meta.u64()?;
        let config_len = meta.len(1)?;
        let config = String::from_utf8(meta.bytes(config_len)?)
            .map_err(|_| Error::Checkpoint("config echo is not UTF-8".into()))?;

        let mut psm = required(TAG_PSM)?;
        let n = psm.len(68)?;
        let l_max = psm.f64()?;
        let radius = psm.f64()?;
        let cloud_seed = psm.u64()?;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let face_index = psm.u32()?;
            let bary = [psm.f64()?, psm.f64()?, psm.f64()?];
            let offset = psm.f64()?;
            let opacity_raw = psm.f64()?;
            let color = [psm.f64()?, psm.f64()?, psm.f64()?];
            samples.push(SurfaceSample {
                face_index,
                bary,
                offset,
                opacity_raw,
                color,
            });
        }
        let cloud = PsmCloud {
            samples,
            l_max,
            radius,
            seed: cloud_seed,
        };

        let gaussians = match section(TAG_GAUS)? {
            None => None,
            Some(mut g) => {
                let count = g.len(1)?;
                let degree = g.u32()? as usize;
                if degree > MAX_SH_DEGREE {
                    return Err(Error::Checkpoint(format!("SH degree {degree}")));
                }
                if count != cloud.len() {
                    return Err(Error::Checkpoint(format!(
                        "{count} Gaussians for {} samples",
                        cloud.len()
                    )));
                }
                let nc = num_coeffs(degree);
                let mut prims = Vec::with_capacity(count);
                for s in &cloud.samples {
                    let local_q = Quat([g.f64()?, g.f64()?, g.f64()?, g.f64()?]);
                    let log_scale = [g.f64()?, g.f64()?, g.f64()?];
                    let mut sh = [[0.0; 3]; 16];
                    for c in sh.iter_mut().take(nc) {
                        *c = [g.f64()?, g.f64()?, g.f64()?];
                    }
                    prims.push(GaussianPrimitive {
                        base: *s,
                        local_q,
                        log_scale,
                        sh,
                    });
                }
                Some(GaussianSet {
                    prims,
                    sh_degree: degree,
                })
            }
        };

        let mut corr = required(TAG_CORR)?;
        let np = corr.len(8)?;
        let corrective_pose = (0..np).map(|_| corr.f64()).collect::<Result<Vec<_>>>()?;
        let ne = corr.len(8)?;
        let corrective_expr = (0..ne).map(|_| corr.f64()).collect::<Result<Vec<_>>>()?;

        let ckpt = Checkpoint {
            stage,
            seed,
            config,
            cloud,
            gaussians,
            corrective_pose,
            corrective_expr,
        };
        ckpt.validate()?;
        Ok(ckpt)
    }

    /// `template` with this checkpoint's corrective bases installed.
    pub fn apply_correctives(&self, template: &TemplateModel) -> Result<TemplateModel> {
        let mut m = template.clone();
        m.set_correctives(self.corrective_pose.clone(), self.corrective_expr.clone())
            .map_err(|e| Error::Checkpoint(format!("checkpoint does not match the template: {e}")))?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn gaussian_bytes(set: &GaussianSet) -> Vec<u8> {
    let nc = num_coeffs(set.sh_degree);
    let mut b = Vec::with_capacity(12 + set.len() * (7 + nc * 3) * 8);
    b.write_u64::<LE>(set.len() as u64).expect("vec write");
    b.write_u32::<LE>(set.sh_degree as u32).expect("vec write");
    for g in &set.prims {
        for v in g
            .local_q
            .0
            .iter()
            .chain(&g.log_scale)
            .chain(g.sh[..nc].iter().flatten())
        {
            b.write_f64::<LE>(*v).expect("vec write");
        }
    }
    b
}

fn tag_name(tag: [u8; 4]) -> String {
    String::from_utf8_lossy(&tag).trim_end().to_string()
}

struct Section<'a> {
    name: String,
    r: Cursor<&'a [u8]>,
}

impl Section<'_> {
    fn trunc(&self) -> Error {
        Error::Truncated {
            section: self.name.clone(),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        self.r.read_u8().map_err(|_| self.trunc())
    }

    fn u32(&mut self) -> Result<u32> {
        self.r.read_u32::<LE>().map_err(|_| self.trunc())
    }

    fn u64(&mut self) -> Result<u64> {
        self.r.read_u64::<LE>().map_err(|_| self.trunc())
    }

    fn f64(&mut self) -> Result<f64> {
        self.r.read_f64::<LE>().map_err(|_| self.trunc())
    }

    /// Reads an element count and checks that `count × min_size` bytes
    /// can still follow.
    fn len(&mut self, min_size: u64) -> Result<usize> {
        let n = self.u64()?;
        let left = self.r.get_ref().len() as u64 - self.r.position();
        if n.checked_mul(min_size).is_none_or(|need| need > left) {
            return Err(self.trunc());
        }
        Ok(n as usize)
    }

    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut v = vec![0u8; n];
        self.r.read_exact(&mut v).map_err(|_| self.trunc())?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_checkpoint(seed: u64, appearance: bool) -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..40);
        let samples: Vec<SurfaceSample> = (0..n)
            .map(|_| {
                let a: f64 = rng.random();
                let b: f64 = rng.random_range(0.0..1.0 - a);
                SurfaceSample {
                    face_index: rng.random_range(0..500),
                    bary: [a, b, 1.0 - a - b],
                    offset: rng.random_range(0.0..0.3),
                    opacity_raw: rng.random_range(-5.0..5.0),
                    color: std::array::from_fn(|_| rng.random()),
                }
            })
            .collect();
        let cloud = PsmCloud {
            samples,
            l_max: 0.3,
            radius: rng.random_range(0.001..0.01),
            seed: rng.random(),
        };
        let gaussians = appearance.then(|| {
            let degree = rng.random_range(0..=3);
            let nc = num_coeffs(degree);
            GaussianSet {
                prims: cloud
                    .samples
                    .iter()
                    .map(|s| {
                        let mut sh = [[0.0; 3]; 16];
                        for c in sh.iter_mut().take(nc) {
                            *c = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                        }
                        GaussianPrimitive {
                            base: *s,
                            local_q: Quat(std::array::from_fn(|_| rng.random_range(-1.0..1.0))),
                            log_scale: std::array::from_fn(|_| rng.random_range(-8.0..-3.0)),
                            sh,
                        }
                    })
                    .collect(),
                sh_degree: degree,
            }
        });
        Checkpoint {
            stage: if appearance { Stage::Appearance } else { Stage::Shape },
            seed: rng.random(),
            config: r#"{"shape_epochs":2}"#.into(),
            cloud,
            gaussians,
            corrective_pose: (0..rng.random_range(0..30))
                .map(|_| rng.random_range(-1e-3..1e-3))
                .collect(),
            corrective_expr: (0..rng.random_range(0..30))
                .map(|_| rng.random_range(-1e-3..1e-3))
                .collect(),
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        for seed in 0..20 {
            let c = random_checkpoint(seed, seed % 2 == 1);
            let bytes = c.to_bytes().unwrap();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn truncation_names_the_section() {
        let bytes = random_checkpoint(3, true).to_bytes().unwrap();
        match Checkpoint::from_bytes(&bytes[..bytes.len() - 3]) {
            Err(Error::Truncated { section }) => assert_eq!(section, "CORR"),
            other => panic!("{other:?}"),
        }
        match Checkpoint::from_bytes(&bytes[..10]) {
            Err(Error::Truncated { section }) => assert_eq!(section, "header"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_and_magic_checked() {
        let mut bytes = random_checkpoint(4, false).to_bytes().unwrap();
        bytes[4..8].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::UnsupportedVersion { found: 2, supported: 1 })
        ));
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::BadMagic(_))));
    }

    #[test]
    fn invariant_violations_rejected() {
        let mut c = random_checkpoint(5, false);
        c.cloud.samples[0].offset = 0.5;
        assert!(c.to_bytes().is_err());
        let mut c = random_checkpoint(6, true);
        c.stage = Stage::Shape;
        assert!(c.to_bytes().is_err());
    }
}
