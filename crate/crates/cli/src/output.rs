//! Rendering of results as aligned tables, CSV and JSON.

use rsa_core::report::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

/// `%g`-style rendering with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        format!("{}e{e}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Shortest representation that round-trips.
pub fn exact(x: f64) -> String {
    x.to_string()
}

pub fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// JSON number; non-finite values become `null`.
pub fn json_num(x: f64) -> String {
    serde_json::to_string(&x).expect("floats serialize")
}

/// Object with keys in the given order.
pub fn json_object(entries: &[(String, String)]) -> String {
    let body: Vec<String> = entries
        .iter()
        .map(|(k, v)| format!("{}: {v}", json_str(k)))
        .collect();
    format!("{{{}}}", body.join(", "))
}

pub fn json_array(items: &[String]) -> String {
    format!("[{}]", items.join(", "))
}

pub fn json_prob_map(labels: &[String], values: &[f64]) -> String {
    json_object(
        &labels
            .iter()
            .zip(values)
            .map(|(l, v)| (l.clone(), json_num(*v)))
            .collect::<Vec<_>>(),
    )
}

/// Left column of labels followed by right-aligned numeric columns.
pub fn text_table(header: &[&str], rows: &[(String, Vec<String>)]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for (label, cells) in rows {
        widths[0] = widths[0].max(label.chars().count());
        for (j, c) in cells.iter().enumerate() {
            widths[j + 1] = widths[j + 1].max(c.len());
        }
    }
    let mut out = String::new();
    let line = |first: &str, rest: &[String]| {
        let mut l = format!("{first:<w$}", w = widths[0]);
        for (j, c) in rest.iter().enumerate() {
            l.push_str(&format!("  {c:>w$}", w = widths[j + 1]));
        }
        l.trim_end().to_string() + "\n"
    };
    let hdr: Vec<String> = header[1..].iter().map(|s| s.to_string()).collect();
    out.push_str(&line(header[0], &hdr));
    for (label, cells) in rows {
        out.push_str(&line(label, cells));
    }
    out
}

pub fn csv_rows(header: &[&str], rows: &[(String, Vec<String>)]) -> String {
    let mut w = csv_writer();
    w.write_record(header).expect("in-memory write");
    for (label, cells) in rows {
        let mut rec = vec![label.clone()];
        rec.extend(cells.iter().cloned());
        w.write_record(&rec).expect("in-memory write");
    }
    finish(w)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv is utf-8")
}

/// A labelled matrix in the requested format.
pub fn render_table(table: &Table, format: Format) -> String {
    let mut header: Vec<&str> = vec![table.corner.as_str()];
    header.extend(table.columns.iter().map(String::as_str));
    match format {
        Format::Table => {
            let rows: Vec<(String, Vec<String>)> = table
                .rows
                .iter()
                .map(|(l, v)| (l.clone(), v.iter().map(|x| sig6(*x)).collect()))
                .collect();
            text_table(&header, &rows)
        }
        Format::Csv => table.to_csv(),
        Format::Json => {
            let rows: Vec<(String, String)> = table
                .rows
                .iter()
                .map(|(l, v)| (l.clone(), json_prob_map(&table.columns, v)))
                .collect();
            json_object(&rows) + "\n"
        }
    }
}
