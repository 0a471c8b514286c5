//! Check records and their text / machine renderings.

use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Info => "info",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Value {
    fn machine(&self) -> String {
        match self {
            Value::Num(x) => format!("{x:.16e}"),
            Value::Int(i) => i.to_string(),
            Value::Text(s) => format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
        }
    }

    fn text(&self) -> String {
        match self {
            Value::Num(x) => format!("{x:.3e}"),
            Value::Int(i) => i.to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub check: String,
    pub status: Status,
    pub fields: Vec<(String, Value)>,
}

impl Record {
    pub fn new(check: impl Into<String>, status: Status) -> Self {
        Record { check: check.into(), status, fields: Vec::new() }
    }

    pub fn pass_if(check: impl Into<String>, ok: bool) -> Self {
        Record::new(check, if ok { Status::Pass } else { Status::Fail })
    }

    pub fn with(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.fields.push((key.to_string(), v.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub name: String,
    pub tags: Vec<String>,
    pub seed: u64,
    pub trials: usize,
    pub records: Vec<Record>,
}

impl Report {
    pub fn new(name: &str, tags: &[String], seed: u64, trials: usize) -> Self {
        Report { name: name.to_string(), tags: tags.to_vec(), seed, trials, records: Vec::new() }
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.status == Status::Fail)
    }

    pub fn find(&self, check: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.check == check)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Machine,
}

pub fn render(reports: &[Report], format: Format, tol: f64) -> String {
    let mut out = String::new();
    for rep in reports {
        match format {
            Format::Machine => {
                let _ = writeln!(
                    out,
                    "example={} seed={} trials={} eps_zero={} tags=\"{}\" status={}",
                    rep.name,
                    rep.seed,
                    rep.trials,
                    Value::Num(tol).machine(),
                    rep.tags.join(","),
                    if rep.passed() { "pass" } else { "fail" }
                );
                for r in &rep.records {
                    let _ = write!(out, "example={} check={} status={}", rep.name, r.check, r.status.label());
                    for (k, v) in &r.fields {
                        let _ = write!(out, " {k}={}", v.machine());
                    }
                    out.push('\n');
                }
            }
            Format::Text => {
                let tags = if rep.tags.is_empty() { String::new() } else { format!(" [{}]", rep.tags.join(", ")) };
                let _ = writeln!(out, "== {}{} (seed {}, {} trials)", rep.name, tags, rep.seed, rep.trials);
                for r in &rep.records {
                    let _ = write!(out, "  {:<4} {}", r.status.label().to_uppercase(), r.check);
                    for (k, v) in &r.fields {
                        let _ = write!(out, "  {k}: {}", v.text());
                    }
                    out.push('\n');
                }
                let _ = writeln!(out, "  => {}", if rep.passed() { "all checks pass" } else { "FAILED" });
            }
        }
    }
    out
}
