//! Fixture files: a tiling, the degradations applied to its render and the
//! analysis request, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{crop, cyclic_shift, degrade, generate_tiling, GrayscaleImage, TilingSpec};
use crate::pipeline::AnalysisRequest;
use crate::scalar::Real;

/// Applied in field order: shift, flips, crop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Degradation {
    /// Cyclic shift `(x, y)` in pixels.
    pub shift: Option<[i64; 2]>,
    pub flip_fraction: f64,
    pub flip_seed: u64,
    /// Side of the top-left square kept.
    pub crop: Option<usize>,
}

impl Degradation {
    pub fn is_identity(&self) -> bool {
        self.shift.is_none() && self.flip_fraction == 0.0 && self.crop.is_none()
    }

    pub fn apply<T: Real>(&self, img: &GrayscaleImage<T>) -> Result<GrayscaleImage<T>> {
        let mut out = match self.shift {
            Some(t) => cyclic_shift(img, t),
            None => img.clone(),
        };
        if self.flip_fraction > 0.0 {
            out = degrade(&out, self.flip_fraction, self.flip_seed)?;
        }
        if let Some(size) = self.crop {
            out = crop(&out, 0, 0, size)?;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    pub tiling: TilingSpec,
    #[serde(default)]
    pub degrade: Degradation,
    pub analysis: AnalysisRequest,
}

impl Fixture {
    pub fn from_toml(text: &str) -> Result<Self> {
        let fixture: Fixture = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        fixture.tiling.validate()?;
        fixture.analysis.validate()?;
        Ok(fixture)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The tiling after the degradations.
    pub fn render<T: Real>(&self) -> Result<GrayscaleImage<T>> {
        self.degrade.apply(&generate_tiling(&self.tiling)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P4MM: &str = r#"
name = "p4mm"

[tiling]
family = "p4mm"
size = 64
period = 16

[degrade]
shift = [5, 3]

[analysis]
basis = [[4.0, 0.0], [0.0, 4.0]]
fl = 4
"#;

    #[test]
    fn parses_and_round_trips() {
        let f = Fixture::from_toml(P4MM).unwrap();
        assert_eq!(f.tiling.size, 64);
        assert_eq!(f.degrade.shift, Some([5, 3]));
        assert_eq!(f.analysis.fl, 4);
        assert_eq!(f.analysis.thd, AnalysisRequest::default().thd);
        assert_eq!(Fixture::from_toml(&f.to_toml().unwrap()).unwrap(), f);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let typo = P4MM.replace("shift =", "shfit =");
        assert!(matches!(Fixture::from_toml(&typo), Err(Error::Config(_))));
        let bad = P4MM.replace("period = 16", "period = 1");
        assert!(matches!(Fixture::from_toml(&bad), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn render_applies_shift_then_crop() {
        let mut f = Fixture::from_toml(P4MM).unwrap();
        let base: GrayscaleImage<f64> = generate_tiling(&f.tiling).unwrap();
        f.degrade.crop = Some(40);
        let img: GrayscaleImage<f64> = f.render().unwrap();
        assert_eq!(img.n(), 40);
        let shifted = cyclic_shift(&base, [5, 3]);
        assert_eq!(img.get(7, 9), shifted.get(7, 9));
        assert!(Degradation::default().is_identity());
    }
}
