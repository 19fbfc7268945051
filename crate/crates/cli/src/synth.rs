//! Synthetic county-style data with planted epidemic regimes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use clustkit::dataset::composite_ranking;
use clustkit::{Error, FeatureTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

/// Demographic and policy columns of the feature CSV, in file order.
pub const FEATURE_COLUMNS: [&str; 13] = [
    "area",
    "population",
    "rank_socioeconomic",
    "rank_household_disability",
    "rank_minority_language",
    "rank_housing_transport",
    "rurality",
    "icu_beds",
    "nursing_home_population",
    "testing_locations",
    "mobility_score",
    "state_closure",
    "school_closure",
];

pub const REGIMES: [&str; 3] = ["early_peak", "late_peak", "flat"];

pub fn first_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 22).unwrap()
}

pub fn last_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 8, 8).unwrap()
}

/// Generated files as CSV text plus the planted regime of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub features: String,
    pub cases: String,
    pub deaths: String,
    pub regimes: Vec<usize>,
}

/// Paths written by [`SyntheticData::write`].
#[derive(Debug, Clone)]
pub struct SyntheticFiles {
    pub features: PathBuf,
    pub cases: PathBuf,
    pub deaths: PathBuf,
    pub planted: PathBuf,
}

struct Regime {
    log_population: f64,
    log_area: f64,
    rurality: f64,
    mobility: f64,
    vulnerability: [f64; 4],
    closure: f64,
    peak_day: Option<f64>,
    amplitude: f64,
    baseline: f64,
}

const REGIME_PARAMS: [Regime; 3] = [
    Regime {
        log_population: 11.8,
        log_area: 6.0,
        rurality: 0.2,
        mobility: 0.7,
        vulnerability: [0.3, -0.4, 0.8, 0.6],
        closure: 3.0,
        peak_day: Some(80.0),
        amplitude: 6.0,
        baseline: 0.05,
    },
    Regime {
        log_population: 10.8,
        log_area: 6.6,
        rurality: 0.45,
        mobility: 0.5,
        vulnerability: [0.6, 0.3, 0.2, -0.1],
        closure: 1.5,
        peak_day: Some(182.0),
        amplitude: 6.0,
        baseline: 0.05,
    },
    Regime {
        log_population: 9.6,
        log_area: 7.3,
        rurality: 0.75,
        mobility: 0.3,
        vulnerability: [-0.5, 0.6, -0.7, -0.4],
        closure: 0.5,
        peak_day: None,
        amplitude: 0.0,
        baseline: 0.4,
    },
];

const COMPONENTS: [usize; 4] = [4, 4, 2, 5];
const PEAK_WIDTH: f64 = 14.0;

/// Builds `rows` counties, assigning regimes round-robin. The four rankings
/// are composite rankings of generated component columns; per-capita income
/// (the third socioeconomic component) is inverted.
pub fn generate_synthetic(rows: usize, seed: u64) -> clustkit::Result<SyntheticData> {
    if rows < 10 {
        return Err(Error::InvalidParameter(format!(
            "synthetic data needs at least 10 rows, got {rows}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let ids: Vec<String> = (0..rows).map(|i| format!("{:05}", 1001 + 2 * i)).collect();
    let regimes: Vec<usize> = (0..rows).map(|i| i % 3).collect();
    let n_days = (last_date() - first_date()).num_days() as usize + 1;

    let mut component_names = Vec::new();
    let mut component_values = Vec::new();
    for (g, &count) in COMPONENTS.iter().enumerate() {
        for c in 0..count {
            component_names.push(format!("g{g}c{c}"));
            let flip = g == 0 && c == 2;
            let col: Vec<f64> = regimes
                .iter()
                .map(|&r| {
                    let m = REGIME_PARAMS[r].vulnerability[g];
                    let v = m + 0.5 * std_normal.sample(&mut rng);
                    if flip {
                        -v
                    } else {
                        v
                    }
                })
                .collect();
            component_values.push(col);
        }
    }
    let comp_rows: Vec<Vec<f64>> = (0..rows)
        .map(|i| component_values.iter().map(|c| c[i]).collect())
        .collect();
    let components = FeatureTable::new(ids.clone(), component_names.clone(), comp_rows)?;
    let mut rankings = Vec::new();
    let mut offset = 0;
    for (g, &count) in COMPONENTS.iter().enumerate() {
        let names: Vec<&str> = component_names[offset..offset + count]
            .iter()
            .map(String::as_str)
            .collect();
        let invert: Vec<bool> = (0..count).map(|c| g == 0 && c == 2).collect();
        rankings.push(composite_ranking(&components, &names, &invert)?);
        offset += count;
    }

    let mut features = String::from("fips");
    for c in FEATURE_COLUMNS {
        features.push(',');
        features.push_str(c);
    }
    features.push('\n');
    let mut date_header = String::from("fips");
    for t in 0..n_days {
        let d = first_date() + Duration::days(t as i64);
        write!(date_header, ",{}", d.format("%Y-%m-%d")).unwrap();
    }
    date_header.push('\n');
    let mut cases = date_header.clone();
    let mut deaths = date_header;

    for (i, &r) in regimes.iter().enumerate() {
        let p = &REGIME_PARAMS[r];
        let population = LogNormal::new(p.log_population, 0.25).unwrap().sample(&mut rng).round();
        let area = LogNormal::new(p.log_area, 0.25).unwrap().sample(&mut rng);
        let rurality = (p.rurality + 0.06 * std_normal.sample(&mut rng)).clamp(0.0, 1.0);
        let jitter = |rng: &mut ChaCha8Rng| (1.0 + 0.15 * std_normal.sample(rng)).max(0.1);
        let icu = (population / 5_000.0 * jitter(&mut rng)).round();
        let nursing = (population * 0.004 * jitter(&mut rng)).round();
        let testing = (population / 20_000.0 * jitter(&mut rng)).round() + 1.0;
        let mobility = (p.mobility + 0.05 * std_normal.sample(&mut rng)).clamp(0.0, 1.0);
        let state = (p.closure + 0.5 * std_normal.sample(&mut rng)).round().clamp(0.0, 3.0);
        let school = (p.closure + 0.5 * std_normal.sample(&mut rng)).round().clamp(0.0, 3.0);
        write!(
            features,
            "{},{:.2},{},{},{},{},{},{:.4},{},{},{},{:.4},{},{}",
            ids[i],
            area,
            population,
            rankings[0][i],
            rankings[1][i],
            rankings[2][i],
            rankings[3][i],
            rurality,
            icu,
            nursing,
            testing,
            mobility,
            state,
            school
        )
        .unwrap();
        features.push('\n');

        let scale = population / 10_000.0;
        let mut daily = Vec::with_capacity(n_days);
        for t in 0..n_days {
            let bump = p
                .peak_day
                .map(|c| (-(t as f64 - c).powi(2) / (2.0 * PEAK_WIDTH * PEAK_WIDTH)).exp())
                .unwrap_or(0.0);
            let mean = scale * (p.amplitude * bump + p.baseline);
            daily.push((mean * jitter(&mut rng)).round());
        }
        let mut cum_cases = 0.0;
        let mut cum_deaths = 0.0;
        cases.push_str(&ids[i]);
        deaths.push_str(&ids[i]);
        for t in 0..n_days {
            cum_cases += daily[t];
            let lagged = if t >= 10 { daily[t - 10] } else { 0.0 };
            let fatality: f64 = 0.03 * (1.0 + 0.3 * (rng.random::<f64>() - 0.5));
            cum_deaths += (lagged * fatality).round();
            write!(cases, ",{cum_cases}").unwrap();
            write!(deaths, ",{cum_deaths}").unwrap();
        }
        cases.push('\n');
        deaths.push('\n');
    }
    Ok(SyntheticData {
        features,
        cases,
        deaths,
        regimes,
    })
}

impl SyntheticData {
    /// Writes `features.csv`, `cases.csv`, `deaths.csv` and `planted.csv`
    /// (row key, regime index, regime name) into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<SyntheticFiles> {
        std::fs::create_dir_all(dir)?;
        let files = SyntheticFiles {
            features: dir.join("features.csv"),
            cases: dir.join("cases.csv"),
            deaths: dir.join("deaths.csv"),
            planted: dir.join("planted.csv"),
        };
        std::fs::write(&files.features, &self.features)?;
        std::fs::write(&files.cases, &self.cases)?;
        std::fs::write(&files.deaths, &self.deaths)?;
        let mut planted = String::from("fips,regime,regime_name\n");
        for (line, &r) in self.features.lines().skip(1).zip(&self.regimes) {
            let id = line.split(',').next().unwrap_or_default();
            writeln!(planted, "{id},{r},{}", REGIMES[r]).unwrap();
        }
        std::fs::write(&files.planted, planted)?;
        Ok(files)
    }
}
