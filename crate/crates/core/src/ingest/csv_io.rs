use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{difference_cumulative, Entity, EntityCollection, Observation, PredictionTable, Quantiles, Split};
use crate::error::{Error, Result};
use crate::Real;

/// Keep only rows whose `column` equals `equals`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnFilter {
    pub column: String,
    pub equals: String,
}

/// Maps the columns of a long-format CSV onto the loader's fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub entity: String,
    pub year: String,
    /// ISO week number, a QuickStats period (`WEEK #38`) or a `YYYY-MM-DD` date.
    pub week: String,
    #[serde(rename = "yield")]
    pub yield_column: String,
    /// Metadata columns; `"*"` takes every column not mapped above.
    pub metadata: Vec<String>,
    /// Years at or after this cutoff form the test split. Defaults to the latest year.
    pub test_year_from: Option<i32>,
    /// Yields are cumulative percentages and are differenced per year.
    pub cumulative: bool,
    /// Densify each year to ISO weeks 1..=52 (53 when present).
    pub fill_year: bool,
    pub filter: Vec<ColumnFilter>,
    pub dataset_name: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            entity: "entity_id".into(),
            year: "year".into(),
            week: "iso_week".into(),
            yield_column: "yield".into(),
            metadata: vec!["*".into()],
            test_year_from: None,
            cumulative: false,
            fill_year: false,
            filter: Vec::new(),
            dataset_name: None,
        }
    }
}

impl CsvSchema {
    /// Parses `key=value` pairs separated by commas, e.g.
    /// `entity=State,year=Year,week=Period,yield=Value,cumulative=true`.
    /// Metadata columns are separated by `;`, filters are `filter=Column:Value`.
    pub fn from_pairs(spec: &str) -> Result<Self> {
        let mut schema = CsvSchema::default();
        for pair in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::config(format!("schema entry '{pair}' is not key=value")))?;
            let value = value.trim().to_string();
            let parse_bool = |v: &str| {
                v.parse::<bool>()
                    .map_err(|_| Error::config(format!("schema key {key}: expected true/false")))
            };
            match key.trim() {
                "entity" => schema.entity = value,
                "year" => schema.year = value,
                "week" => schema.week = value,
                "yield" => schema.yield_column = value,
                "metadata" => schema.metadata = value.split(';').map(|s| s.trim().to_string()).collect(),
                "test_year_from" => {
                    schema.test_year_from = Some(value.parse().map_err(|_| {
                        Error::config(format!("schema key test_year_from: bad year '{value}'"))
                    })?)
                }
                "cumulative" => schema.cumulative = parse_bool(&value)?,
                "fill_year" => schema.fill_year = parse_bool(&value)?,
                "dataset_name" => schema.dataset_name = Some(value),
                "filter" => {
                    let (column, equals) = value.split_once(':').ok_or_else(|| {
                        Error::config("schema filter must be Column:Value".to_string())
                    })?;
                    schema.filter.push(ColumnFilter {
                        column: column.to_string(),
                        equals: equals.to_string(),
                    });
                }
                other => return Err(Error::config(format!("unknown schema key '{other}'"))),
            }
        }
        Ok(schema)
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::config(format!("missing column '{name}'")))
}

fn parse_week(raw: &str) -> Option<u32> {
    let raw = raw.trim();
    let week = if let Ok(w) = raw.parse::<u32>() {
        w
    } else if let Some(rest) = raw.to_ascii_uppercase().strip_prefix("WEEK #") {
        rest.trim().parse().ok()?
    } else {
        NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok()?.iso_week().week()
    };
    (1..=53).contains(&week).then_some(week)
}

fn parse_number(raw: &str) -> Option<Real> {
    let cleaned: String = raw.chars().filter(|c| *c != ',').collect();
    cleaned.trim().parse::<Real>().ok().filter(|v| v.is_finite())
}

struct RawRow {
    year: i32,
    week: u32,
    value: Real,
}

/// Loads a long-format CSV (one row per entity and week) into a collection.
pub fn load_long_csv(path: &Path, schema: &CsvSchema) -> Result<EntityCollection> {
    let mut reader = open(path)?;
    let headers = reader.headers()?.clone();
    let entity_col = column(&headers, &schema.entity)?;
    let year_col = column(&headers, &schema.year)?;
    let week_col = column(&headers, &schema.week)?;
    let yield_col = column(&headers, &schema.yield_column)?;
    let filters = schema
        .filter
        .iter()
        .map(|f| Ok((column(&headers, &f.column)?, f.equals.as_str())))
        .collect::<Result<Vec<_>>>()?;
    let mapped: BTreeSet<usize> = [entity_col, year_col, week_col, yield_col].into();
    let metadata_cols: Vec<(String, usize)> = if schema.metadata.iter().any(|m| m == "*") {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| !mapped.contains(i))
            .map(|(i, h)| (h.to_string(), i))
            .collect()
    } else {
        schema
            .metadata
            .iter()
            .map(|m| Ok((m.clone(), column(&headers, m)?)))
            .collect::<Result<_>>()?
    };

    let mut rows: BTreeMap<String, Vec<RawRow>> = BTreeMap::new();
    let mut metadata: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut seen: BTreeSet<(String, i32, u32)> = BTreeSet::new();

    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if filters.iter().any(|(i, eq)| record.get(*i) != Some(*eq)) {
            continue;
        }
        let row_err = |message: String| Error::Row { line, message };
        let entity = record.get(entity_col).unwrap_or("").to_string();
        if entity.is_empty() {
            return Err(row_err("empty entity id".into()));
        }
        let year_raw = record.get(year_col).unwrap_or("");
        let year: i32 = year_raw
            .parse()
            .map_err(|_| row_err(format!("non-numeric year '{year_raw}'")))?;
        let week_raw = record.get(week_col).unwrap_or("");
        let week = parse_week(week_raw).ok_or_else(|| row_err(format!("unparseable week '{week_raw}'")))?;
        let value_raw = record.get(yield_col).unwrap_or("");
        let value = parse_number(value_raw)
            .ok_or_else(|| row_err(format!("non-numeric yield '{value_raw}'")))?;
        if value < 0.0 {
            return Err(row_err(format!("negative yield {value}")));
        }
        if !seen.insert((entity.clone(), year, week)) {
            return Err(row_err(format!(
                "duplicate row for entity {entity}, year {year}, week {week}"
            )));
        }
        let meta = metadata.entry(entity.clone()).or_default();
        for (name, idx) in &metadata_cols {
            if let Some(v) = record.get(*idx) {
                meta.entry(name.clone()).or_insert_with(|| v.to_string());
            }
        }
        rows.entry(entity).or_default().push(RawRow { year, week, value });
    }

    if rows.is_empty() {
        return Err(Error::config(format!("{} contains no usable rows", path.display())));
    }
    let cutoff = schema
        .test_year_from
        .unwrap_or_else(|| rows.values().flatten().map(|r| r.year).max().unwrap_or(0));

    let mut entities = Vec::new();
    for (id, mut raw) in rows {
        raw.sort_by_key(|r| (r.year, r.week));
        let (train, test): (Vec<RawRow>, Vec<RawRow>) = raw.into_iter().partition(|r| r.year < cutoff);
        let both = !train.is_empty() && !test.is_empty();
        for (split, part) in [(Split::Train, train), (Split::Test, test)] {
            if part.is_empty() {
                continue;
            }
            let entity_id = if both && split == Split::Test {
                format!("{id}@test")
            } else {
                id.clone()
            };
            entities.push(Entity {
                entity_id,
                metadata: metadata.get(&id).cloned().unwrap_or_default(),
                observations: build_timeline(part, schema),
                split,
            });
        }
    }
    entities.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));

    let collection = EntityCollection {
        entities,
        dataset_name: schema.dataset_name.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        }),
        normalization_scale: 1.0,
        artifacts: Vec::new(),
    };
    collection.validate()?;
    Ok(collection)
}

/// Turns sorted raw rows into a dense observation list, one year at a time.
fn build_timeline(rows: Vec<RawRow>, schema: &CsvSchema) -> Vec<Observation> {
    let mut by_year: BTreeMap<i32, Vec<RawRow>> = BTreeMap::new();
    for r in rows {
        by_year.entry(r.year).or_default().push(r);
    }
    let mut out = Vec::new();
    for (year, rows) in by_year {
        let reported: BTreeMap<u32, Real> = rows.iter().map(|r| (r.week, r.value)).collect();
        let first = *reported.keys().next().expect("non-empty year");
        let last = *reported.keys().next_back().expect("non-empty year");
        let (from, to) = if schema.fill_year {
            (1, last.max(52))
        } else if schema.cumulative {
            (first, last)
        } else {
            (0, 0)
        };
        let mut year_obs = Vec::new();
        if from == 0 {
            for (&week, &value) in &reported {
                year_obs.push(obs(year, week, value, false));
            }
        } else {
            let mut carry = 0.0;
            for week in from..=to {
                match reported.get(&week) {
                    Some(&v) => {
                        carry = v;
                        year_obs.push(obs(year, week, v, false));
                    }
                    None => {
                        let fill = if schema.cumulative { carry } else { 0.0 };
                        if week > first && week < last {
                            tracing::debug!(year, week, "filled reporting gap");
                        }
                        year_obs.push(obs(year, week, fill, true));
                    }
                }
            }
        }
        if schema.cumulative {
            year_obs = difference_cumulative(&year_obs);
        }
        out.extend(year_obs);
    }
    for (i, o) in out.iter_mut().enumerate() {
        o.week_index = i as u32;
    }
    out
}

fn obs(year: i32, iso_week: u32, yield_value: Real, filled: bool) -> Observation {
    Observation {
        week_index: 0,
        iso_week,
        year,
        yield_value,
        filled,
    }
}

/// Writes a collection in the default long format read by [`CsvSchema::default`].
pub fn write_long_csv(collection: &EntityCollection, path: &Path) -> Result<()> {
    let keys: BTreeSet<&str> = collection
        .entities
        .iter()
        .flat_map(|e| e.metadata.keys().map(String::as_str))
        .collect();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["entity_id", "year", "iso_week", "yield"];
    header.extend(keys.iter().copied());
    w.write_record(&header)?;
    for e in &collection.entities {
        for o in &e.observations {
            let mut rec = vec![
                e.entity_id.clone(),
                o.year.to_string(),
                o.iso_week.to_string(),
                o.yield_value.to_string(),
            ];
            rec.extend(keys.iter().map(|k| e.metadata.get(*k).cloned().unwrap_or_default()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `entity_id, week_index, q10, q50, q90`; q10 and q90 may be absent
/// (column or cell) and then default to q50.
pub fn load_external_predictions(path: &Path) -> Result<PredictionTable> {
    let mut reader = open(path)?;
    let headers = reader.headers()?.clone();
    let entity_col = column(&headers, "entity_id")?;
    let week_col = column(&headers, "week_index")?;
    let q50_col = column(&headers, "q50")?;
    let q10_col = column(&headers, "q10").ok();
    let q90_col = column(&headers, "q90").ok();

    let mut table = PredictionTable::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| Error::Row { line, message };
        let entity = record.get(entity_col).unwrap_or("");
        let week: u32 = record
            .get(week_col)
            .unwrap_or("")
            .parse()
            .map_err(|_| row_err("non-numeric week_index".into()))?;
        let q50 = parse_number(record.get(q50_col).unwrap_or(""))
            .ok_or_else(|| row_err("non-numeric q50".into()))?;
        let optional = |col: Option<usize>, name: &str| -> Result<Real> {
            match col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
                None => Ok(q50),
                Some(raw) => parse_number(raw).ok_or_else(|| row_err(format!("non-numeric {name}"))),
            }
        };
        let q = Quantiles {
            q10: optional(q10_col, "q10")?,
            q50,
            q90: optional(q90_col, "q90")?,
        };
        if q.q10 > q.q90 {
            return Err(row_err(format!("q10 {} exceeds q90 {}", q.q10, q.q90)));
        }
        table
            .insert(entity, week, q)
            .map_err(|e| row_err(e.to_string()))?;
    }
    Ok(table)
}

pub fn write_predictions_csv(table: &PredictionTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["entity_id", "week_index", "q10", "q50", "q90"])?;
    for (entity, week, q) in table.iter() {
        w.write_record([
            entity.to_string(),
            week.to_string(),
            q.q10.to_string(),
            q.q50.to_string(),
            q.q90.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn three_rows_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.csv",
            "entity_id,year,iso_week,yield\nA,2023,3,30\nA,2023,1,10\nA,2023,2,20\n",
        );
        let schema = CsvSchema { test_year_from: Some(2024), ..Default::default() };
        let c = load_long_csv(&p, &schema).unwrap();
        assert_eq!(c.entities.len(), 1);
        let e = &c.entities[0];
        assert_eq!(e.values(), vec![10.0, 20.0, 30.0]);
        assert_eq!(e.observations.iter().map(|o| o.week_index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(e.split, Split::Train);
    }

    #[test]
    fn quickstats_column_names_via_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "q.csv",
            "State,Year,Period,Data Item,Value\n\
             IOWA,2022,WEEK #40,\"CORN, GRAIN - PROGRESS, MEASURED IN PCT HARVESTED\",10\n\
             IOWA,2022,WEEK #41,\"CORN, GRAIN - PROGRESS, MEASURED IN PCT HARVESTED\",35\n\
             IOWA,2023,WEEK #40,\"CORN, GRAIN - PROGRESS, MEASURED IN PCT HARVESTED\",12\n",
        );
        let schema = CsvSchema::from_pairs(
            "entity=State,year=Year,week=Period,yield=Value,metadata=Data Item,cumulative=true",
        )
        .unwrap();
        let c = load_long_csv(&p, &schema).unwrap();
        let train = c.get("IOWA").unwrap();
        assert_eq!(train.values(), vec![10.0, 25.0]);
        assert!(c.get("IOWA@test").is_some());
    }

    #[test]
    fn yield_column_named_pct_harvested() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.csv", "state,yr,wk,PCT HARVESTED\nOHIO,2021,1,5\n");
        let schema = CsvSchema::from_pairs("entity=state,year=yr,week=wk,yield=PCT HARVESTED").unwrap();
        let c = load_long_csv(&p, &schema).unwrap();
        assert_eq!(c.entities[0].values(), vec![5.0]);
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.csv", "entity_id,year,iso_week\nA,2023,1\n");
        let err = load_long_csv(&p, &CsvSchema::default()).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("'yield'")), "{err}");
    }

    #[test]
    fn non_numeric_yield_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "n.csv", "entity_id,year,iso_week,yield\nA,2023,1,1\nA,2023,2,(D)\n");
        match load_long_csv(&p, &CsvSchema::default()).unwrap_err() {
            Error::Row { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_week_is_row_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "entity_id,year,iso_week,yield\nA,2023,5,1\nA,2023,5,2\n");
        let err = load_long_csv(&p, &CsvSchema::default()).unwrap_err();
        assert!(matches!(&err, Error::Row { message, .. } if message.contains("week 5")), "{err}");
    }

    #[test]
    fn cumulative_gaps_are_forward_filled_and_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "g.csv",
            "entity_id,year,iso_week,yield\nA,2022,40,10\nA,2022,42,50\nA,2022,43,60\n",
        );
        let schema = CsvSchema { cumulative: true, test_year_from: Some(2030), ..Default::default() };
        let c = load_long_csv(&p, &schema).unwrap();
        let e = &c.entities[0];
        assert_eq!(e.values(), vec![10.0, 0.0, 40.0, 10.0]);
        assert!(e.observations[1].filled);
        assert!(!e.observations[2].filled);
    }

    #[test]
    fn fill_year_densifies_to_full_calendar() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "f.csv", "entity_id,year,iso_week,yield\nA,2022,40,10\nA,2022,41,30\n");
        let schema = CsvSchema {
            cumulative: true,
            fill_year: true,
            test_year_from: Some(2030),
            ..Default::default()
        };
        let e = load_long_csv(&p, &schema).unwrap().entities.remove(0);
        assert_eq!(e.observations.len(), 52);
        assert_eq!(e.observations[39].yield_value, 10.0);
        assert_eq!(e.observations[40].yield_value, 20.0);
        assert_eq!(e.observations[41].yield_value, 0.0);
        assert!(e.observations[51].filled);
    }

    #[test]
    fn external_predictions_defaults_and_ordering() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "p.csv",
            "entity_id,week_index,q10,q50,q90\nA,12,0.1,0.2,0.3\nA,13,,0.2,\n",
        );
        let t = load_external_predictions(&p).unwrap();
        assert_eq!(t.get("A", 12), Some(Quantiles { q10: 0.1, q50: 0.2, q90: 0.3 }));
        assert_eq!(t.get("A", 13), Some(Quantiles { q10: 0.2, q50: 0.2, q90: 0.2 }));

        let bad = write(&dir, "b.csv", "entity_id,week_index,q10,q50,q90\nA,12,0.5,0.2,0.3\n");
        assert!(matches!(load_external_predictions(&bad), Err(Error::Row { .. })));

        let only_median = write(&dir, "m.csv", "entity_id,week_index,q50\nB,3,0.4\n");
        let t = load_external_predictions(&only_median).unwrap();
        assert_eq!(t.get("B", 3).unwrap().q90, 0.4);
    }

    #[test]
    fn schema_pairs_reject_unknown_keys() {
        assert!(CsvSchema::from_pairs("entity=a,colour=blue").is_err());
        let s = CsvSchema::from_pairs("metadata=farm;variety,filter=Data Item:X").unwrap();
        assert_eq!(s.metadata, vec!["farm", "variety"]);
        assert_eq!(s.filter[0].equals, "X");
    }

    #[test]
    fn week_parsing_variants() {
        assert_eq!(parse_week("38"), Some(38));
        assert_eq!(parse_week("WEEK #07"), Some(7));
        assert_eq!(parse_week("2023-01-09"), Some(2));
        assert_eq!(parse_week("0"), None);
        assert_eq!(parse_week("soon"), None);
    }
}
