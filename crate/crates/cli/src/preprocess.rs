//! Column-wise preprocessing: seasonal averaging, mean removal, variance
//! normalization and first differencing, applied in that order.
//!
//! Columns named `year` and `month` are time-index columns. They are never
//! transformed, only regrouped or trimmed alongside the data.

use std::collections::{BTreeMap, BTreeSet};

use specaus_core::svar::SeriesSample;

use crate::config::ColumnPrep;
use crate::error::CliError;

pub const YEAR: &str = "year";
pub const MONTH: &str = "month";

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// A named table of equal-length columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn from_sample(s: &SeriesSample) -> Self {
        Table {
            names: s.names().to_vec(),
            columns: (0..s.n_series()).map(|i| s.series(i).to_vec()).collect(),
        }
    }

    pub fn into_sample(self) -> Result<SeriesSample, CliError> {
        SeriesSample::new(self.names, self.columns).map_err(CliError::from)
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|i| self.columns[i].as_slice())
    }
}

fn is_index(name: &str) -> bool {
    name == YEAR || name == MONTH
}

/// First month of the season: the month following the largest cyclic gap
/// between consecutive selected months.
pub fn season_start(months: &[u32]) -> Result<u32, CliError> {
    let set: BTreeSet<u32> = months.iter().copied().collect();
    if set.is_empty() {
        return Err(invalid("seasonal_average: empty month list"));
    }
    if let Some(m) = set.iter().find(|m| !(1..=12).contains(*m)) {
        return Err(invalid(format!("seasonal_average: month {m} is not in 1..=12")));
    }
    let sorted: Vec<u32> = set.into_iter().collect();
    let mut best = (0u32, sorted[0]);
    for i in 0..sorted.len() {
        let here = sorted[i];
        let next = sorted[(i + 1) % sorted.len()];
        let gap = (next + 12 - here - 1) % 12 + 1;
        if gap > best.0 {
            best = (gap, next);
        }
    }
    Ok(best.1)
}

/// Season label of a calendar month: months at or after the season start
/// belong to the following year when the season wraps past December.
pub fn season_year(year: i64, month: u32, start: u32, months: &[u32]) -> i64 {
    let wraps = months.iter().any(|&m| m < start);
    if wraps && month >= start {
        year + 1
    } else {
        year
    }
}

fn int_column(t: &Table, name: &str) -> Result<Vec<i64>, CliError> {
    let col = t
        .column(name)
        .ok_or_else(|| invalid(format!("seasonal averaging needs a `{name}` column")))?;
    col.iter()
        .enumerate()
        .map(|(row, &x)| {
            if x.fract() == 0.0 && x.is_finite() {
                Ok(x as i64)
            } else {
                Err(invalid(format!("`{name}` row {}: {x} is not an integer", row + 2)))
            }
        })
        .collect()
}

/// Averages each configured column over its month list per season. Only
/// seasons with every month present in every column are kept.
fn seasonal(t: &Table, prep: &BTreeMap<String, ColumnPrep>) -> Result<Table, CliError> {
    let years = int_column(t, YEAR)?;
    let months = int_column(t, MONTH)?;
    for (row, &m) in months.iter().enumerate() {
        if !(1..=12).contains(&m) {
            return Err(invalid(format!("`month` row {}: {m} is not in 1..=12", row + 2)));
        }
    }
    let data: Vec<usize> = (0..t.names.len()).filter(|&i| !is_index(&t.names[i])).collect();
    let mut per_column: Vec<BTreeMap<i64, Vec<(u32, f64)>>> = Vec::with_capacity(data.len());
    let mut wanted: Vec<BTreeSet<u32>> = Vec::with_capacity(data.len());
    for &i in &data {
        let name = &t.names[i];
        let list = prep
            .get(name)
            .and_then(|p| p.seasonal_average.clone())
            .ok_or_else(|| invalid(format!("column `{name}` has no seasonal_average while other columns do")))?;
        let start = season_start(&list)?;
        let set: BTreeSet<u32> = list.iter().copied().collect();
        let mut groups: BTreeMap<i64, Vec<(u32, f64)>> = BTreeMap::new();
        for row in 0..t.len() {
            let m = months[row] as u32;
            if set.contains(&m) {
                let y = season_year(years[row], m, start, &list);
                groups.entry(y).or_default().push((m, t.columns[i][row]));
            }
        }
        per_column.push(groups);
        wanted.push(set);
    }
    let mut seasons: Option<BTreeSet<i64>> = None;
    for (groups, set) in per_column.iter().zip(&wanted) {
        let complete: BTreeSet<i64> = groups
            .iter()
            .filter(|(_, obs)| {
                let seen: BTreeSet<u32> = obs.iter().map(|(m, _)| *m).collect();
                seen == *set && obs.len() == set.len()
            })
            .map(|(y, _)| *y)
            .collect();
        seasons = Some(match seasons {
            None => complete,
            Some(s) => s.intersection(&complete).copied().collect(),
        });
    }
    let seasons: Vec<i64> = seasons.unwrap_or_default().into_iter().collect();
    let mut names = vec![YEAR.to_string()];
    let mut columns = vec![seasons.iter().map(|&y| y as f64).collect::<Vec<f64>>()];
    for (k, &i) in data.iter().enumerate() {
        names.push(t.names[i].clone());
        columns.push(
            seasons
                .iter()
                .map(|y| {
                    let obs = &per_column[k][y];
                    obs.iter().map(|(_, x)| x).sum::<f64>() / obs.len() as f64
                })
                .collect(),
        );
    }
    Ok(Table { names, columns })
}

pub fn demean(col: &mut [f64]) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    col.iter_mut().for_each(|x| *x -= mean);
}

/// Divides a centred column by its standard deviation.
pub fn normalize(name: &str, col: &mut [f64]) -> Result<(), CliError> {
    let n = col.len() as f64;
    let var = col.iter().map(|x| x * x).sum::<f64>() / n;
    let scale = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !(var > 0.0) || var.sqrt() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Err(CliError::Numerical(format!("column `{name}`: zero variance")));
    }
    let sd = var.sqrt();
    col.iter_mut().for_each(|x| *x /= sd);
    Ok(())
}

pub fn difference(col: &[f64]) -> Vec<f64> {
    col.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Runs the configured steps on every column named in `prep`.
pub fn apply(input: &Table, prep: &BTreeMap<String, ColumnPrep>) -> Result<Table, CliError> {
    for name in prep.keys() {
        if input.index_of(name).is_none() {
            return Err(invalid(format!("preprocess: no column `{name}` in the input")));
        }
        if is_index(name) {
            return Err(invalid(format!("preprocess: `{name}` is a time-index column")));
        }
    }
    let mut t = if prep.values().any(|p| p.seasonal_average.is_some()) {
        seasonal(input, prep)?
    } else {
        input.clone()
    };
    if t.is_empty() {
        return Err(invalid("preprocess: no rows left"));
    }
    for (i, name) in t.names.clone().iter().enumerate() {
        let Some(p) = prep.get(name) else { continue };
        if p.demean || p.normalize {
            demean(&mut t.columns[i]);
        }
        if p.normalize {
            normalize(name, &mut t.columns[i])?;
        }
    }
    if prep.values().any(|p| p.difference) {
        if t.len() < 2 {
            return Err(invalid("preprocess: differencing needs at least two rows"));
        }
        for (i, name) in t.names.iter().enumerate() {
            t.columns[i] = match prep.get(name) {
                Some(p) if p.difference => difference(&t.columns[i]),
                _ => t.columns[i][1..].to_vec(),
            };
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prep(entries: &[(&str, ColumnPrep)]) -> BTreeMap<String, ColumnPrep> {
        entries.iter().map(|(n, p)| (n.to_string(), p.clone())).collect()
    }

    #[test]
    fn difference_of_a_ramp() {
        let t = Table {
            names: vec!["x".into()],
            columns: vec![vec![1.0, 2.0, 3.0, 4.0]],
        };
        let p = prep(&[("x", ColumnPrep { difference: true, ..Default::default() })]);
        assert_eq!(apply(&t, &p).unwrap().columns[0], vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn constant_column_has_zero_variance() {
        let t = Table {
            names: vec!["x".into()],
            columns: vec![vec![2.5; 10]],
        };
        let p = prep(&[("x", ColumnPrep { normalize: true, ..Default::default() })]);
        let err = apply(&t, &p).unwrap_err();
        assert!(err.to_string().contains("zero variance"));
    }

    #[test]
    fn season_start_uses_largest_gap() {
        assert_eq!(season_start(&[12, 1, 2]).unwrap(), 12);
        assert_eq!(season_start(&[6, 7, 8]).unwrap(), 6);
        assert_eq!(season_start(&[11, 12, 1, 2, 3]).unwrap(), 11);
        assert_eq!(season_start(&[1]).unwrap(), 1);
        assert!(season_start(&[13]).is_err());
    }

    #[test]
    fn winter_spans_the_year_boundary() {
        let mut years = Vec::new();
        let mut months = Vec::new();
        let mut x = Vec::new();
        for y in 2000..2003 {
            for m in 1..=12 {
                years.push(y as f64);
                months.push(m as f64);
                x.push((y - 2000) as f64 * 100.0 + m as f64);
            }
        }
        let t = Table {
            names: vec!["year".into(), "month".into(), "x".into()],
            columns: vec![years, months, x],
        };
        let p = prep(&[("x", ColumnPrep { seasonal_average: Some(vec![12, 1, 2]), ..Default::default() })]);
        let out = apply(&t, &p).unwrap();
        assert_eq!(out.names, vec!["year", "x"]);
        // 2000 lacks its December, 2003 lacks January and February
        assert_eq!(out.columns[0], vec![2001.0, 2002.0]);
        assert_eq!(out.columns[1], vec![(12.0 + 101.0 + 102.0) / 3.0, (112.0 + 201.0 + 202.0) / 3.0]);
    }

    #[test]
    fn steps_run_in_order() {
        let t = Table {
            names: vec!["a".into(), "b".into()],
            columns: vec![vec![1.0, 3.0, 2.0, 6.0], vec![4.0, 5.0, 6.0, 7.0]],
        };
        let p = prep(&[("a", ColumnPrep { normalize: true, difference: true, ..Default::default() })]);
        let out = apply(&t, &p).unwrap();
        let mut a = vec![1.0, 3.0, 2.0, 6.0];
        demean(&mut a);
        normalize("a", &mut a).unwrap();
        assert_eq!(out.columns[0], difference(&a));
        assert_eq!(out.columns[1], vec![5.0, 6.0, 7.0]);
    }
}
