//! Seeded synthetic sampling campaigns calibrated to published per-location
//! pH statistics.
//!
//! pH is drawn from a normal kernel with `σ = (max - min) / 6`, truncated to
//! `[min, max]` and re-centered so the truncated mean equals the profile
//! mean. Every other parameter is `base + coupling·(pH - mean) + noise·ε`,
//! `ε ~ N(0, 1)`, clipped to its schema plausibility range.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::dataset::{Dataset, ParameterSchema, Sample, LOCATION_IDS, PH_BOUNDS, TARGET};
use crate::error::{Error, Result};

/// Rejection-sampling attempts per pH value before clamping.
pub const MAX_ATTEMPTS: usize = 1000;

/// Locations with published statistics.
pub const PUBLISHED_LOCATIONS: [u8; 7] = [1, 2, 3, 4, 6, 7, 10];

/// `(location, mean, min, max)` as used by the shipped profiles.
const PUBLISHED_PH: [(u8, f64, f64, f64); 7] = [
    (1, 7.37, 6.8, 7.9),
    (2, 7.4, 6.9, 7.81),
    (3, 7.3, 6.9, 7.7),
    // Published as 7.34 (7.5-7.7): the mean lies below the minimum.
    (4, 7.6, 7.5, 7.7),
    (6, 7.4, 7.1, 7.7),
    (7, 7.54, 7.1, 7.85),
    (10, 7.37, 7.0, 7.9),
];

const LOCATION_4_NOTE: &str =
    "location 4 was published as mean 7.34 with range 7.5-7.7 (mean below minimum); shipped with mean 7.6";

/// `(name, base, coupling per pH unit, noise sd)` for the default schema.
/// Coupled parameters carry the pH signal.
const DEFAULT_COUPLINGS: [(&str, f64, f64, f64); 16] = [
    ("iron", 0.3, 0.0, 0.05),
    ("chlorine_total", 0.8, 0.0, 0.1),
    ("chlorine_free", 0.4, 0.0, 0.08),
    ("calcium", 60.0, 0.0, 6.0),
    ("magnesium", 25.0, 0.0, 3.0),
    ("hardness", 180.0, 60.0, 1.5),
    ("total_suspended_solids", 150.0, 0.0, 40.0),
    ("sulfates", 70.0, 0.0, 8.0),
    ("turbidity", 40.0, 0.0, 10.0),
    ("electrical_conductivity", 450.0, 200.0, 5.0),
    ("total_dissolved_solids", 290.0, 130.0, 3.3),
    ("salinity", 0.2, 0.0, 0.02),
    ("temperature", 24.0, -6.0, 0.15),
    ("dissolved_oxygen", 7.0, 0.0, 0.5),
    ("param16", 10.0, 0.0, 1.0),
    ("param17", 5.0, 0.0, 0.5),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterProfile {
    pub name: String,
    pub base: f64,
    pub coupling: f64,
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocationProfile {
    pub location_id: u8,
    pub ph_mean: f64,
    pub ph_min: f64,
    pub ph_max: f64,
    pub parameters: Vec<ParameterProfile>,
    /// Free-text provenance, written as `#` comment lines.
    pub note: Option<String>,
}

impl LocationProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !LOCATION_IDS.contains(&self.location_id) {
            return bad(format!("location {} outside 1-10", self.location_id));
        }
        let (lo, mean, hi) = (self.ph_min, self.ph_mean, self.ph_max);
        if !(lo <= mean && mean <= hi) {
            return bad(format!("pH statistics violate min <= mean <= max: {mean} ({lo}-{hi})"));
        }
        if !(PH_BOUNDS.0 <= lo && hi <= PH_BOUNDS.1) {
            return bad(format!("pH range {lo}-{hi} outside 0-14"));
        }
        for p in &self.parameters {
            if !(p.base.is_finite() && p.coupling.is_finite() && p.noise.is_finite() && p.noise >= 0.0) {
                return bad(format!("parameter `{}` has invalid coefficients", p.name));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(note) = &self.note {
            for line in note.lines() {
                s.push_str(&format!("# {line}\n"));
            }
        }
        s.push_str("location,ph_mean,ph_min,ph_max\n");
        s.push_str(&format!("{},{},{},{}\n", self.location_id, self.ph_mean, self.ph_min, self.ph_max));
        s.push_str("name,base,coupling,noise\n");
        for p in &self.parameters {
            s.push_str(&format!("{},{},{},{}\n", p.name, p.base, p.coupling, p.noise));
        }
        s
    }

    /// Parses the profile text format. The two header lines are optional.
    pub fn parse(text: &str) -> Result<Self> {
        let mut note = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(c) = line.strip_prefix('#') {
                note.push(c.trim().to_string());
            } else if !line.is_empty() {
                rows.push((i + 1, line));
            }
        }
        let err = |lineno: usize, m: &str| Error::Config(format!("profile line {lineno}: {m}"));
        let num = |lineno: usize, s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(lineno, &format!("bad number `{}`", s.trim())))
        };

        let mut rows = rows.into_iter().peekable();
        if rows.peek().is_some_and(|(_, l)| l.starts_with("location")) {
            rows.next();
        }
        let (lineno, head) = rows.next().ok_or_else(|| Error::Config("profile is empty".into()))?;
        let f: Vec<&str> = head.split(',').collect();
        if f.len() != 4 {
            return Err(err(lineno, "expected `location,ph_mean,ph_min,ph_max`"));
        }
        let location_id = f[0].trim().parse().map_err(|_| err(lineno, "bad location id"))?;
        let (ph_mean, ph_min, ph_max) = (num(lineno, f[1])?, num(lineno, f[2])?, num(lineno, f[3])?);

        if rows.peek().is_some_and(|(_, l)| l.starts_with("name,")) {
            rows.next();
        }
        let mut parameters = Vec::new();
        for (lineno, line) in rows {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(err(lineno, "expected `name,base,coupling,noise`"));
            }
            parameters.push(ParameterProfile {
                name: f[0].trim().to_string(),
                base: num(lineno, f[1])?,
                coupling: num(lineno, f[2])?,
                noise: num(lineno, f[3])?,
            });
        }
        let profile = LocationProfile {
            location_id,
            ph_mean,
            ph_min,
            ph_max,
            parameters,
            note: (!note.is_empty()).then(|| note.join("\n")),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        LocationProfile::parse(&text)
    }
}

fn default_parameters() -> Vec<ParameterProfile> {
    DEFAULT_COUPLINGS
        .iter()
        .map(|&(name, base, coupling, noise)| ParameterProfile {
            name: name.to_string(),
            base,
            coupling,
            noise,
        })
        .collect()
}

/// Built-in profile for any location 1-10. Locations without published
/// statistics are interpolated from their neighbours and say so in `note`.
pub fn shipped_profile(location_id: u8) -> Result<LocationProfile> {
    let stats = |id: u8| PUBLISHED_PH.iter().find(|r| r.0 == id).map(|r| (r.1, r.2, r.3));
    let lerp = |a: (f64, f64, f64), b: (f64, f64, f64), t: f64| {
        (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t, a.2 + (b.2 - a.2) * t)
    };
    let (ph_mean, ph_min, ph_max, note) = match (location_id, stats(location_id)) {
        (4, Some(s)) => (s.0, s.1, s.2, Some(LOCATION_4_NOTE.to_string())),
        (_, Some(s)) => (s.0, s.1, s.2, None),
        (5, None) => {
            let s = lerp(stats(4).unwrap(), stats(6).unwrap(), 0.5);
            (s.0, s.1, s.2, Some("placeholder: no published statistics; interpolated between locations 4 and 6".into()))
        }
        (id @ (8 | 9), None) => {
            let s = lerp(stats(7).unwrap(), stats(10).unwrap(), f64::from(id - 7) / 3.0);
            (s.0, s.1, s.2, Some("placeholder: no published statistics; interpolated between locations 7 and 10".into()))
        }
        _ => return Err(Error::Config(format!("no profile for location {location_id}"))),
    };
    Ok(LocationProfile {
        location_id,
        ph_mean,
        ph_min,
        ph_max,
        parameters: default_parameters(),
        note,
    })
}

/// Profiles for all ten locations.
pub fn shipped_profiles() -> Vec<LocationProfile> {
    LOCATION_IDS.map(|id| shipped_profile(id).expect("every location has a profile")).collect()
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `Φ(b) - Φ(a)` for `a <= b`, evaluated on the tail that keeps precision.
fn normal_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        0.5 * (erfc(a / SQRT_2) - erfc(b / SQRT_2))
    } else {
        0.5 * (erfc(-b / SQRT_2) - erfc(-a / SQRT_2))
    }
}

/// Mean of `N(center, sigma²)` truncated to `[lo, hi]`.
pub fn truncated_normal_mean(center: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = ((lo - center) / sigma, (hi - center) / sigma);
    center + sigma * (std_normal_pdf(a) - std_normal_pdf(b)) / normal_mass(a, b)
}

/// Kernel center whose truncation to `[lo, hi]` has mean `target`.
fn recenter(target: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let (mut left, mut right) = (lo - 8.0 * sigma, hi + 8.0 * sigma);
    for _ in 0..200 {
        let mid = 0.5 * (left + right);
        if truncated_normal_mean(mid, sigma, lo, hi) < target {
            left = mid;
        } else {
            right = mid;
        }
    }
    0.5 * (left + right)
}

/// Draws `n ≥ 2` samples for `profile`, deterministic in `seed`. Profile
/// parameters missing from `schema` are not generated.
pub fn generate(profile: &LocationProfile, schema: &ParameterSchema, n: usize, seed: u64) -> Result<Dataset> {
    profile.validate()?;
    if n < 2 {
        return Err(Error::Config(format!("generator needs n >= 2, got {n}")));
    }
    let ph_index = schema
        .index_of(TARGET)
        .ok_or_else(|| Error::Config(format!("schema has no `{TARGET}` parameter")))?;
    for p in &profile.parameters {
        if p.name == TARGET {
            return Err(Error::Config(format!("profile lists the target `{TARGET}` as a parameter")));
        }
    }
    let coefficients: Vec<Option<&ParameterProfile>> = schema
        .names()
        .enumerate()
        .map(|(k, name)| {
            if k == ph_index {
                return Ok(None);
            }
            profile
                .parameters
                .iter()
                .find(|p| p.name == name)
                .map(Some)
                .ok_or_else(|| Error::Config(format!("profile lacks schema parameter `{name}`")))
        })
        .collect::<Result<_>>()?;

    let (lo, hi) = (profile.ph_min, profile.ph_max);
    let sigma = (hi - lo) / 6.0;
    let center = if sigma > 0.0 { recenter(profile.ph_mean, sigma, lo, hi) } else { lo };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let ph = if sigma > 0.0 {
            let mut draw = None;
            for _ in 0..MAX_ATTEMPTS {
                let z: f64 = rng.sample(StandardNormal);
                let v = center + sigma * z;
                if (lo..=hi).contains(&v) {
                    draw = Some(v);
                    break;
                }
            }
            draw.unwrap_or(center).clamp(lo, hi)
        } else {
            lo
        };
        let values = schema
            .params()
            .iter()
            .zip(&coefficients)
            .map(|(param, coef)| match coef {
                None => ph,
                Some(c) => {
                    let eps: f64 = rng.sample(StandardNormal);
                    let v = c.base + c.coupling * (ph - profile.ph_mean) + c.noise * eps;
                    match param.range {
                        Some((pmin, pmax)) => v.clamp(pmin, pmax),
                        None => v,
                    }
                }
            })
            .collect();
        samples.push(Sample {
            location_id: profile.location_id,
            sequence_index: i as u64,
            values,
        });
    }
    Dataset::new(schema.clone(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{pearson, summary_stats};

    #[test]
    fn location_1_matches_published_statistics() {
        let schema = ParameterSchema::default();
        let p = shipped_profile(1).unwrap();
        for seed in 0..5 {
            let d = generate(&p, &schema, 48, seed).unwrap();
            let s = summary_stats(&d, TARGET).unwrap();
            assert!((s.mean - 7.37).abs() <= 0.1, "seed {seed}: mean {}", s.mean);
            assert!(s.min >= 6.8 && s.max <= 7.9);
        }
    }

    #[test]
    fn zero_noise_zero_coupling_gives_constants() {
        let schema = ParameterSchema::default();
        let mut p = shipped_profile(2).unwrap();
        for q in &mut p.parameters {
            q.coupling = 0.0;
            q.noise = 0.0;
        }
        let d = generate(&p, &schema, 20, 3).unwrap();
        for q in &p.parameters {
            assert!(d.column(&q.name).unwrap().iter().all(|&v| v == q.base), "{}", q.name);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let schema = ParameterSchema::default();
        let p = shipped_profile(7).unwrap();
        assert_eq!(generate(&p, &schema, 30, 5).unwrap(), generate(&p, &schema, 30, 5).unwrap());
        assert_ne!(generate(&p, &schema, 30, 5).unwrap(), generate(&p, &schema, 30, 6).unwrap());
    }

    #[test]
    fn invalid_requests_are_config_errors() {
        let schema = ParameterSchema::default();
        let p = shipped_profile(1).unwrap();
        assert!(matches!(generate(&p, &schema, 1, 0), Err(Error::Config(_))));
        let inconsistent = LocationProfile {
            ph_mean: 7.34,
            ph_min: 7.5,
            ph_max: 7.7,
            ..shipped_profile(4).unwrap()
        };
        assert!(matches!(generate(&inconsistent, &schema, 10, 0), Err(Error::Config(_))));
        let mut missing = p.clone();
        missing.parameters.pop();
        assert!(matches!(generate(&missing, &schema, 10, 0), Err(Error::Config(_))));
    }

    #[test]
    fn profile_text_round_trip() {
        for p in shipped_profiles() {
            assert_eq!(LocationProfile::parse(&p.to_text()).unwrap(), p);
        }
        let bare = "1,7.37,6.8,7.9\niron,0.3,0,0.05\n";
        assert_eq!(LocationProfile::parse(bare).unwrap().parameters.len(), 1);
        assert!(LocationProfile::parse("").is_err());
        assert!(LocationProfile::parse("1,7.37,6.8\n").is_err());
    }

    #[test]
    fn placeholders_are_labelled() {
        for id in [5, 8, 9] {
            let p = shipped_profile(id).unwrap();
            assert!(p.note.as_deref().unwrap().starts_with("placeholder"));
            p.validate().unwrap();
        }
        assert!(shipped_profile(4).unwrap().note.unwrap().contains("7.34"));
        assert!(shipped_profile(1).unwrap().note.is_none());
    }

    #[test]
    fn recentering_hits_the_target_mean() {
        for &(_, mean, lo, hi) in &PUBLISHED_PH {
            let sigma = (hi - lo) / 6.0;
            let c = recenter(mean, sigma, lo, hi);
            assert!((truncated_normal_mean(c, sigma, lo, hi) - mean).abs() < 1e-10);
        }
    }

    #[test]
    fn truncated_mean_matches_quadrature() {
        // Midpoint rule over [lo, hi] with 200k cells.
        let (c, s, lo, hi) = (7.2, 0.2, 6.9, 7.8);
        let cells = 200_000;
        let h = (hi - lo) / cells as f64;
        let (mut mass, mut first) = (0.0, 0.0);
        for i in 0..cells {
            let x = lo + (i as f64 + 0.5) * h;
            let w = (-0.5 * ((x - c) / s).powi(2)).exp();
            mass += w;
            first += w * x;
        }
        assert!((truncated_normal_mean(c, s, lo, hi) - first / mass).abs() < 1e-9);
    }

    #[test]
    fn coupling_sign_shows_in_correlation() {
        let schema = ParameterSchema::default();
        let p = shipped_profile(1).unwrap();
        let d = generate(&p, &schema, 300, 17).unwrap();
        let ph = d.column(TARGET).unwrap();
        for q in p.parameters.iter().filter(|q| q.coupling != 0.0) {
            let r = pearson(&ph, &d.column(&q.name).unwrap()).unwrap();
            assert_eq!(r.signum(), q.coupling.signum(), "{}", q.name);
        }
    }

    #[test]
    fn sample_mean_converges() {
        let schema = ParameterSchema::default();
        let n = 10_000;
        for id in PUBLISHED_LOCATIONS {
            let p = shipped_profile(id).unwrap();
            let d = generate(&p, &schema, n, 1234).unwrap();
            let ph = d.column(TARGET).unwrap();
            assert!(ph.iter().all(|v| (p.ph_min..=p.ph_max).contains(v)));
            let mean = ph.iter().sum::<f64>() / n as f64;
            let bound = 3.0 * (p.ph_max - p.ph_min) / (12.0 * n as f64).sqrt();
            assert!((mean - p.ph_mean).abs() <= bound, "location {id}: {mean} vs {}", p.ph_mean);
        }
    }
}
