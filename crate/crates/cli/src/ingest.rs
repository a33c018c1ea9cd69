//! Reads CSV and libsvm files into a [`Dataset`].

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use krr_sketch::Dataset;

use crate::config::{InputFormat, InputSpec, LabelColumn};

pub fn load(spec: &InputSpec) -> Result<Dataset> {
    let dataset = match spec.format {
        InputFormat::Csv => read_csv(&spec.path, spec.header, spec.label_column),
        InputFormat::Libsvm => read_libsvm(&spec.path),
    }
    .with_context(|| format!("reading {}", spec.path.display()))?;
    Ok(dataset)
}

pub fn read_csv(path: &Path, header: bool, label: LabelColumn) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            bail!(
                "line {line}: expected {expected} fields, found {}",
                record.len()
            );
        }
        let mut row = record
            .iter()
            .enumerate()
            .map(|(c, v)| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        anyhow!(
                            "line {line}, column {}: '{v}' is not a finite number",
                            c + 1
                        )
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let y = match label {
            LabelColumn::None => None,
            LabelColumn::Last => row.pop(),
            LabelColumn::Index(c) if c <= row.len() => Some(row.remove(c - 1)),
            LabelColumn::Index(c) => bail!(
                "line {line}: label column {c} but only {} fields",
                row.len()
            ),
        };
        if row.is_empty() {
            bail!("line {line}: no feature columns");
        }
        points.push(row);
        labels.extend(y);
    }
    if points.is_empty() {
        bail!("no data rows");
    }
    let labels = (label != LabelColumn::None).then_some(labels);
    Ok(Dataset::new(points, labels)?)
}

/// `label index:value ...` with 1-based, strictly increasing indices.
pub fn read_libsvm(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0;
    for (n, text) in reader.lines().enumerate() {
        let text = text?;
        let line = n + 1;
        let body = text.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let y = tokens.next().unwrap_or_default();
        labels.push(
            y.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| anyhow!("line {line}: label '{y}' is not a finite number"))?,
        );
        let mut row = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| anyhow!("line {line}: expected index:value, found '{tok}'"))?;
            let i: usize = i
                .parse()
                .map_err(|_| anyhow!("line {line}: bad feature index '{i}'"))?;
            if i <= last {
                bail!("line {line}: feature indices must be 1-based and increasing, found {i} after {last}");
            }
            let v: f64 = v
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| anyhow!("line {line}: value '{v}' is not a finite number"))?;
            last = i;
            row.push((i, v));
        }
        dim = dim.max(last);
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("no data rows");
    }
    let dim = dim.max(1);
    let points = rows
        .into_iter()
        .map(|r| {
            let mut x = vec![0.0; dim];
            for (i, v) in r {
                x[i - 1] = v;
            }
            x
        })
        .collect();
    Ok(Dataset::new(points, Some(labels))?)
}

/// Writes `x1..xd,y` with a header row.
pub fn write_csv(path: &Path, dataset: &Dataset, y: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=dataset.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (x, y) in dataset.points().iter().zip(y) {
        w.write_record(x.iter().chain(std::iter::once(y)).map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

/// One number per line.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let reader =
        BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut out = Vec::new();
    for (n, text) in reader.lines().enumerate() {
        let text = text?;
        let v = text.trim();
        if v.is_empty() {
            continue;
        }
        out.push(
            v.parse::<f64>()
                .map_err(|_| anyhow!("{} line {}: '{v}' is not a number", path.display(), n + 1))?,
        );
    }
    Ok(out)
}
