//! The SQL method: the model writes SQL against the three dataset tables,
//! the backend runs it read-only, and the model reads the result back.
//!
//! The backend is an in-memory SQLite database with a great-circle distance
//! function standing in for a spatial extension. Statements pass a lexical
//! guard (single SELECT or WITH, no mutating keywords), then SQLite's own
//! read-only check and an authorizer that admits only reads and function
//! calls. A progress handler interrupts statements past the timeout.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use aisbench_core::catalog::Params;
use aisbench_core::geo::great_circle_distance;
use aisbench_core::table::{DYNAMIC_HEADER, PORTS_HEADER, STATIC_HEADER};
use aisbench_core::{DatasetBundle, GeoPoint, QueryId};
use rusqlite::functions::FunctionFlags;
use rusqlite::hooks::{AuthAction, AuthContext, Authorization};
use rusqlite::types::ValueRef;
use rusqlite::{params, Connection};

use crate::error::{BenchError, Result};

pub const DDL: &str = "\
CREATE TABLE dynamic (mmsi INTEGER NOT NULL, time TEXT NOT NULL, latitude REAL NOT NULL, longitude REAL NOT NULL, sog REAL NOT NULL);
CREATE TABLE static (mmsi INTEGER PRIMARY KEY, name TEXT, imo INTEGER, length REAL, breadth REAL, draught REAL, ship_type TEXT, annual_co2 REAL, co2_per_nm REAL, annual_distance_nm REAL);
CREATE TABLE ports (name TEXT PRIMARY KEY, latitude REAL NOT NULL, longitude REAL NOT NULL);
CREATE INDEX dynamic_mmsi_time ON dynamic (mmsi, time);
CREATE INDEX dynamic_time ON dynamic (time);";

const DIALECT_NOTES: &str = "\
Dialect: SQLite 3 with window functions. `time` is text 'HH:MM' and sorts chronologically; all rows are from 2024-11-20.
st_distance_sphere(lat1, lon1, lat2, lon2) returns the great-circle distance in meters (NULL if any argument is NULL).
sog is in knots, length/breadth/draught in meters, annual_co2 in metric tonnes, co2_per_nm in kg per nautical mile.";

const DENYLIST: &[&str] = &[
    "INSERT", "UPDATE", "DELETE", "DROP", "ALTER", "CREATE", "ATTACH", "DETACH", "PRAGMA", "REPLACE", "VACUUM",
    "REINDEX", "ANALYZE", "TRUNCATE", "BEGIN", "COMMIT", "ROLLBACK", "SAVEPOINT", "RELEASE", "LOAD_EXTENSION",
    "GRANT", "REVOKE", "UPSERT",
];

const DENIED_FUNCTIONS: &[&str] = &["load_extension", "readfile", "writefile", "edit", "fts3_tokenizer"];

/// The statement with comments removed and string literals blanked, so
/// keywords inside literals are not mistaken for code.
fn code_only(sql: &str) -> String {
    let mut out = String::with_capacity(sql.len());
    let mut chars = sql.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\'' | '"' => {
                out.push(' ');
                for d in chars.by_ref() {
                    if d == c {
                        break;
                    }
                }
            }
            '-' if chars.peek() == Some(&'-') => {
                for d in chars.by_ref() {
                    if d == '\n' {
                        break;
                    }
                }
                out.push(' ');
            }
            '/' if chars.peek() == Some(&'*') => {
                chars.next();
                let mut prev = ' ';
                for d in chars.by_ref() {
                    if prev == '*' && d == '/' {
                        break;
                    }
                    prev = d;
                }
                out.push(' ');
            }
            _ => out.push(c),
        }
    }
    out
}

/// Lexical safety check run before SQLite sees the text.
pub fn guard(sql: &str) -> Result<(), String> {
    let code = code_only(sql);
    let body = code.trim().trim_end_matches(|c: char| c == ';' || c.is_whitespace());
    if body.is_empty() {
        return Err("empty statement".into());
    }
    if body.contains(';') {
        return Err("multiple statements".into());
    }
    let upper = body.to_uppercase();
    let words: Vec<&str> = upper.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).filter(|w| !w.is_empty()).collect();
    if !matches!(words.first(), Some(&"SELECT") | Some(&"WITH")) {
        return Err("only SELECT or WITH statements are allowed".into());
    }
    if let Some(w) = words.iter().find(|w| DENYLIST.contains(w)) {
        return Err(format!("keyword {w} is not allowed"));
    }
    Ok(())
}

/// SQL from a model response: the first fenced block, else the longest
/// span that starts at an uppercase SELECT or WITH, runs to a semicolon or
/// blank line, and has a FROM clause.
pub fn extract_sql(text: &str) -> Option<String> {
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let body_start = after.find('\n').map_or(0, |i| i + 1);
        let lang = after[..body_start].trim().to_lowercase();
        let body = &after[body_start..];
        let Some(end) = body.find("```") else { break };
        let sql = body[..end].trim().trim_end_matches(';').trim();
        if (lang.is_empty() || lang == "sql" || lang == "sqlite") && !sql.is_empty() {
            return Some(sql.to_string());
        }
        rest = &body[end + 3..];
    }
    let mut best: Option<&str> = None;
    for kw in ["SELECT", "WITH"] {
        for (pos, _) in text.match_indices(kw) {
            let boundary = text[..pos].chars().next_back().is_none_or(|c| !c.is_ascii_alphanumeric());
            if !boundary {
                continue;
            }
            let tail = &text[pos..];
            let end = [tail.find(';'), tail.find("\n\n")].into_iter().flatten().min().unwrap_or(tail.len());
            let span = tail[..end].trim();
            if best.is_none_or(|b| span.len() > b.len()) {
                best = Some(span);
            }
        }
    }
    best.filter(|s| s.to_uppercase().contains(" FROM ")).map(str::to_string)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecStatus {
    Ok,
    /// The backend raised an error or the statement timed out.
    Error(String),
    /// Refused before or during preparation as unsafe.
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlExchange {
    pub sql: String,
    pub status: ExecStatus,
    pub columns: Vec<String>,
    pub first_row: Option<Vec<Option<String>>>,
    /// Aligned text of the capped result.
    pub rendered: String,
    pub row_count: usize,
    pub truncated: bool,
}

impl SqlExchange {
    fn failed(sql: &str, status: ExecStatus) -> Self {
        Self {
            sql: sql.to_string(),
            status,
            columns: Vec::new(),
            first_row: None,
            rendered: String::new(),
            row_count: 0,
            truncated: false,
        }
    }

    pub fn error(&self) -> Option<&str> {
        match &self.status {
            ExecStatus::Ok => None,
            ExecStatus::Error(e) | ExecStatus::Rejected(e) => Some(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub timeout: Duration,
    pub row_cap: usize,
    pub byte_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { timeout: Duration::from_millis(5000), row_cap: 200, byte_cap: 16 * 1024 }
    }
}

struct Session {
    conn: Connection,
    deadline: Arc<Mutex<Option<Instant>>>,
}

/// Read-only sessions over identical copies of one subset.
pub struct Backend {
    sessions: Vec<Mutex<Session>>,
    limits: Limits,
}

fn authorize(ctx: AuthContext<'_>) -> Authorization {
    match ctx.action {
        AuthAction::Select | AuthAction::Read { .. } | AuthAction::Recursive => Authorization::Allow,
        AuthAction::Function { function_name } => {
            if DENIED_FUNCTIONS.iter().any(|f| f.eq_ignore_ascii_case(function_name)) {
                Authorization::Deny
            } else {
                Authorization::Allow
            }
        }
        _ => Authorization::Deny,
    }
}

fn open_session(bundle: &DatasetBundle) -> rusqlite::Result<Session> {
    let conn = Connection::open_in_memory()?;
    conn.create_scalar_function(
        "st_distance_sphere",
        4,
        FunctionFlags::SQLITE_UTF8 | FunctionFlags::SQLITE_DETERMINISTIC,
        |ctx| {
            let v: [Option<f64>; 4] = [ctx.get(0)?, ctx.get(1)?, ctx.get(2)?, ctx.get(3)?];
            Ok(match v {
                [Some(a), Some(b), Some(c), Some(d)] => {
                    Some(great_circle_distance(GeoPoint { lat: a, lon: b }, GeoPoint { lat: c, lon: d }))
                }
                _ => None,
            })
        },
    )?;
    load(&conn, bundle)?;
    conn.pragma_update(None, "query_only", true)?;
    conn.authorizer(Some(authorize));
    let deadline: Arc<Mutex<Option<Instant>>> = Arc::new(Mutex::new(None));
    let d = deadline.clone();
    conn.progress_handler(1000, Some(move || d.lock().map(|d| d.is_some_and(|d| Instant::now() > d)).unwrap_or(true)));
    Ok(Session { conn, deadline })
}

/// Drops and recreates the three tables from `bundle`.
fn load(conn: &Connection, bundle: &DatasetBundle) -> rusqlite::Result<()> {
    conn.execute_batch("DROP TABLE IF EXISTS dynamic; DROP TABLE IF EXISTS static; DROP TABLE IF EXISTS ports;")?;
    conn.execute_batch(DDL)?;
    let tx = conn.unchecked_transaction()?;
    {
        let mut ins = tx.prepare("INSERT INTO dynamic VALUES (?1, ?2, ?3, ?4, ?5)")?;
        for t in &bundle.trajectories {
            for p in &t.points {
                ins.execute(params![t.mmsi.get(), p.time.to_string(), p.position.lat, p.position.lon, p.sog])?;
            }
        }
        let mut ins = tx.prepare("INSERT INTO static VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)")?;
        for s in &bundle.statics {
            ins.execute(params![
                s.mmsi.get(),
                s.name,
                s.imo.map(|i| i.get()),
                s.length,
                s.breadth,
                s.draught,
                s.ship_type,
                s.annual_co2_t,
                s.co2_per_nm_kg,
                s.annual_distance_nm
            ])?;
        }
        let mut ins = tx.prepare("INSERT INTO ports VALUES (?1, ?2, ?3)")?;
        for p in &bundle.ports {
            ins.execute(params![p.name, p.position.lat, p.position.lon])?;
        }
    }
    tx.commit()
}

fn cell_text(v: ValueRef<'_>) -> Option<String> {
    match v {
        ValueRef::Null => None,
        ValueRef::Integer(i) => Some(i.to_string()),
        ValueRef::Real(f) => Some(f.to_string()),
        ValueRef::Text(t) => Some(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Some(format!("<blob {} bytes>", b.len())),
    }
}

fn render_rows(columns: &[String], rows: &[Vec<Option<String>>], truncated: bool) -> String {
    let shown = |c: &Option<String>| c.clone().unwrap_or_else(|| "NULL".into());
    let mut widths: Vec<usize> = columns.iter().map(|c| c.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(shown(c).chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: Vec<String>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(padded.join(" | ").trim_end());
        out.push('\n');
    };
    line(&mut out, columns.to_vec());
    line(&mut out, widths.iter().map(|w| "-".repeat(*w)).collect());
    for r in rows {
        line(&mut out, r.iter().map(shown).collect());
    }
    if truncated {
        out.push_str("... (result truncated)\n");
    }
    out
}

impl Backend {
    /// One session per parallel worker, each holding the whole subset.
    pub fn load(bundle: &DatasetBundle, limits: Limits, sessions: usize) -> Result<Self> {
        let sessions = (0..sessions.max(1))
            .map(|_| open_session(bundle).map(Mutex::new))
            .collect::<rusqlite::Result<Vec<_>>>()
            .map_err(|e| BenchError::Backend(format!("loading the SQLite backend failed: {e}; check backend.url")))?;
        Ok(Self { sessions, limits })
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    /// Runs one statement on session `slot` (taken modulo the pool size).
    /// Failures are captured in the exchange.
    pub fn execute(&self, sql: &str, slot: usize) -> SqlExchange {
        if let Err(why) = guard(sql) {
            return SqlExchange::failed(sql, ExecStatus::Rejected(why));
        }
        let session = self.sessions[slot % self.sessions.len()].lock().expect("session lock");
        *session.deadline.lock().expect("deadline lock") = Some(Instant::now() + self.limits.timeout);
        let result = self.run(&session.conn, sql);
        *session.deadline.lock().expect("deadline lock") = None;
        result
    }

    fn run(&self, conn: &Connection, sql: &str) -> SqlExchange {
        let mut stmt = match conn.prepare(sql) {
            Ok(s) => s,
            Err(rusqlite::Error::SqliteFailure(e, msg)) if e.code == rusqlite::ErrorCode::AuthorizationForStatementDenied => {
                return SqlExchange::failed(sql, ExecStatus::Rejected(msg.unwrap_or_else(|| "not authorized".into())));
            }
            Err(e @ rusqlite::Error::MultipleStatement) => {
                return SqlExchange::failed(sql, ExecStatus::Rejected(e.to_string()));
            }
            Err(e) => return SqlExchange::failed(sql, ExecStatus::Error(e.to_string())),
        };
        if !stmt.readonly() {
            return SqlExchange::failed(sql, ExecStatus::Rejected("statement is not read-only".into()));
        }
        let columns: Vec<String> = stmt.column_names().into_iter().map(str::to_string).collect();
        let ncol = columns.len();
        let mut rows_out: Vec<Vec<Option<String>>> = Vec::new();
        let mut first_row = None;
        let mut bytes = 0;
        let mut truncated = false;
        let mut row_count = 0;
        let mut rows = match stmt.query([]) {
            Ok(r) => r,
            Err(e) => return SqlExchange::failed(sql, ExecStatus::Error(e.to_string())),
        };
        loop {
            match rows.next() {
                Ok(Some(row)) => {
                    let cells: Vec<Option<String>> =
                        (0..ncol).map(|i| row.get_ref(i).map(cell_text).unwrap_or(None)).collect();
                    row_count += 1;
                    if first_row.is_none() {
                        first_row = Some(cells.clone());
                    }
                    let size: usize = cells.iter().map(|c| c.as_ref().map_or(4, String::len) + 3).sum();
                    if rows_out.len() >= self.limits.row_cap || bytes + size > self.limits.byte_cap {
                        truncated = true;
                        break;
                    }
                    bytes += size;
                    rows_out.push(cells);
                }
                Ok(None) => break,
                Err(rusqlite::Error::SqliteFailure(e, _)) if e.code == rusqlite::ErrorCode::OperationInterrupted => {
                    return SqlExchange::failed(sql, ExecStatus::Error("statement timeout".into()));
                }
                Err(e) => return SqlExchange::failed(sql, ExecStatus::Error(e.to_string())),
            }
        }
        let rendered = render_rows(&columns, &rows_out, truncated);
        SqlExchange { sql: sql.to_string(), status: ExecStatus::Ok, columns, first_row, rendered, row_count, truncated }
    }

    /// Every MMSI present in the dynamic or static table of any session.
    pub fn vessel_ids(&self) -> Result<BTreeSet<u32>> {
        let mut out = BTreeSet::new();
        for s in &self.sessions {
            let s = s.lock().expect("session lock");
            let mut stmt = s
                .conn
                .prepare("SELECT mmsi FROM dynamic UNION SELECT mmsi FROM static")
                .map_err(|e| BenchError::Backend(e.to_string()))?;
            let ids = stmt.query_map([], |r| r.get::<_, u32>(0)).map_err(|e| BenchError::Backend(e.to_string()))?;
            for id in ids {
                out.insert(id.map_err(|e| BenchError::Backend(e.to_string()))?);
            }
        }
        Ok(out)
    }

    /// Row counts of (dynamic, static, ports) in the first session.
    pub fn row_counts(&self) -> Result<(usize, usize, usize)> {
        let s = self.sessions[0].lock().expect("session lock");
        let count = |t: &str| -> Result<usize> {
            s.conn
                .query_row(&format!("SELECT count(*) FROM {t}"), [], |r| r.get::<_, i64>(0))
                .map(|n| n as usize)
                .map_err(|e| BenchError::Backend(e.to_string()))
        };
        Ok((count("dynamic")?, count("static")?, count("ports")?))
    }

    /// Full contents of a table in a fixed order, for idempotence checks.
    pub fn dump(&self, table: &str) -> Result<String> {
        let order = if table == "dynamic" { "mmsi, time" } else if table == "ports" { "name" } else { "mmsi" };
        let ex = self.execute(&format!("SELECT * FROM {table} ORDER BY {order}"), 0);
        match ex.status {
            ExecStatus::Ok if !ex.truncated => Ok(ex.rendered),
            ExecStatus::Ok => {
                let s = self.sessions[0].lock().expect("session lock");
                let mut stmt = s.conn.prepare(&format!("SELECT * FROM {table} ORDER BY {order}")).map_err(|e| BenchError::Backend(e.to_string()))?;
                let n = stmt.column_count();
                let mut out = String::new();
                let mut rows = stmt.query([]).map_err(|e| BenchError::Backend(e.to_string()))?;
                while let Some(r) = rows.next().map_err(|e| BenchError::Backend(e.to_string()))? {
                    let cells: Vec<String> = (0..n).map(|i| r.get_ref(i).map(cell_text).unwrap_or(None).unwrap_or_default()).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                Ok(out)
            }
            _ => Err(BenchError::Backend(ex.error().unwrap_or("").to_string())),
        }
    }
}

/// Table descriptions, dialect notes and three sample rows per table.
pub fn schema_card(bundle: &DatasetBundle) -> String {
    let mut out = String::from("You can query an SQL database of AIS ship traffic with these tables:\n\n");
    out.push_str(DDL.lines().filter(|l| l.starts_with("CREATE TABLE")).collect::<Vec<_>>().join("\n").as_str());
    out.push_str("\n\n");
    out.push_str(DIALECT_NOTES);
    out.push_str("\n\nSample rows:\n");
    let _ = writeln!(out, "dynamic: {DYNAMIC_HEADER}");
    for r in bundle.trajectories.iter().flat_map(|t| t.records()).take(3) {
        let _ = writeln!(out, "  {},{},{},{},{}", r.mmsi, r.time, r.position.lat, r.position.lon, r.sog);
    }
    let _ = writeln!(out, "static: {STATIC_HEADER}");
    for s in bundle.statics.iter().take(3) {
        let mut row = String::new();
        aisbench_core::table::push_static_row(&mut row, s);
        let _ = write!(out, "  {row}");
    }
    let _ = writeln!(out, "ports: {PORTS_HEADER}");
    for p in bundle.ports.iter().take(3) {
        let _ = writeln!(out, "  {},{},{}", p.name, p.position.lat, p.position.lon);
    }
    out
}

pub fn generation_prompt(card: &str, question: &str) -> String {
    format!(
        "{card}\nQuestion: {question}\nWrite a single SQLite SELECT statement that answers the question. \
         Return it in a ```sql code block.\n"
    )
}

pub fn regeneration_prompt(card: &str, question: &str, sql: &str, error: &str) -> String {
    format!(
        "{}\nThe previous statement failed.\n```sql\n{sql}\n```\nError: {error}\n\
         Write a corrected statement in a ```sql code block.\n",
        generation_prompt(card, question)
    )
}

pub fn interpretation_prompt(question: &str, exchange: &SqlExchange, instruction: &str) -> String {
    let result = match exchange.error() {
        Some(e) => format!("Error: {e}\n"),
        None => exchange.rendered.clone(),
    };
    format!(
        "Question: {question}\nThe following SQL was run against the AIS database:\n```sql\n{}\n```\nResult:\n{result}{instruction}\n",
        exchange.sql
    )
}

const RATE: &str = "COALESCE(co2_per_nm, annual_co2 * 1000.0 / NULLIF(annual_distance_nm, 0))";

/// Hand-written SQL for the queries the scripted model answers correctly.
pub fn reference_sql(id: QueryId, bindings: &Params) -> Option<String> {
    let m = bindings.get("MMSI").unwrap_or("NULL");
    Some(match id.get() {
        1 => format!("SELECT name FROM static WHERE mmsi = {m}"),
        2 => format!("SELECT imo FROM static WHERE mmsi = {m}"),
        3 => format!("SELECT annual_co2 FROM static WHERE mmsi = {m}"),
        4 => "SELECT count(DISTINCT mmsi) FROM dynamic".into(),
        5 => "SELECT mmsi FROM static WHERE length IS NOT NULL AND breadth IS NOT NULL AND draught IS NOT NULL \
              ORDER BY length * breadth * draught DESC, mmsi LIMIT 1"
            .into(),
        6 => format!("SELECT {RATE} FROM static WHERE mmsi = {m}"),
        7 => format!("SELECT length * breadth * draught FROM static WHERE mmsi = {m}"),
        8 => format!("SELECT max(sog) FROM dynamic WHERE mmsi = {m}"),
        10 => format!(
            "WITH p AS (SELECT latitude, longitude, LAG(latitude) OVER (ORDER BY time) AS plat, \
             LAG(longitude) OVER (ORDER BY time) AS plon FROM dynamic WHERE mmsi = {m}) \
             SELECT COALESCE(sum(st_distance_sphere(plat, plon, latitude, longitude)), 0) / 1000.0 FROM p"
        ),
        11 => format!("SELECT avg(sog) * 1.852 FROM dynamic WHERE mmsi = {m} AND sog > 0.1"),
        12 => format!("SELECT latitude, longitude FROM dynamic WHERE mmsi = {m} ORDER BY time DESC LIMIT 1"),
        15 => format!(
            "SELECT group_concat(DISTINCT b.mmsi) FROM dynamic a JOIN dynamic b ON b.time = a.time AND b.mmsi <> a.mmsi \
             WHERE a.mmsi = {m} AND st_distance_sphere(a.latitude, a.longitude, b.latitude, b.longitude) < 500"
        ),
        19 => format!(
            "WITH seg AS (SELECT mmsi, time, LAG(time) OVER w AS t0, \
             st_distance_sphere(LAG(latitude) OVER w, LAG(longitude) OVER w, latitude, longitude) AS d \
             FROM dynamic WINDOW w AS (PARTITION BY mmsi ORDER BY time)), \
             burn AS (SELECT seg.mmsi, sum(seg.d) / 1852.0 * {RATE} AS kg FROM seg JOIN static ON static.mmsi = seg.mmsi \
             WHERE seg.t0 >= '15:00' AND seg.time <= '16:00' GROUP BY seg.mmsi) \
             SELECT mmsi FROM burn WHERE kg > 0 ORDER BY kg DESC, mmsi LIMIT 1"
        ),
        21 => format!(
            "SELECT CASE WHEN breadth IS NULL OR draught IS NULL THEN NULL \
             WHEN breadth <= 77.5 AND draught <= 20.1 THEN 'yes' ELSE 'no' END FROM static WHERE mmsi = {m}"
        ),
        22 => format!(
            "WITH seg AS (SELECT mmsi, st_distance_sphere(LAG(latitude) OVER w, LAG(longitude) OVER w, latitude, longitude) AS d \
             FROM dynamic WINDOW w AS (PARTITION BY mmsi ORDER BY time)), \
             e AS (SELECT seg.mmsi, COALESCE(sum(seg.d), 0) / 1852.0 * {RATE} AS kg FROM seg JOIN static ON static.mmsi = seg.mmsi \
             GROUP BY seg.mmsi) \
             SELECT mmsi FROM e WHERE kg > 0 ORDER BY kg DESC, mmsi LIMIT 1"
        ),
        23 => format!("SELECT mmsi FROM static WHERE {RATE} IS NOT NULL ORDER BY {RATE} ASC, mmsi LIMIT 1"),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extraction() {
        assert_eq!(extract_sql("Sure:\n```sql\nSELECT 1;\n```\nDone").as_deref(), Some("SELECT 1"));
        assert_eq!(extract_sql("```\nSELECT a FROM t\n```").as_deref(), Some("SELECT a FROM t"));
        assert_eq!(
            extract_sql("The query is SELECT count(*) FROM static; it counts ships.").as_deref(),
            Some("SELECT count(*) FROM static")
        );
        assert_eq!(extract_sql("I am not sure how to select that."), None);
        assert_eq!(extract_sql("```python\nprint(1)\n```"), None);
    }

    #[test]
    fn guard_rules() {
        assert!(guard("SELECT 1").is_ok());
        assert!(guard("  with x as (select 1) select * from x;  ").is_ok());
        assert!(guard("SELECT 'DROP TABLE x' AS s").is_ok());
        assert!(guard("SELECT 1 -- ; DROP TABLE static").is_ok());
        assert!(guard("DROP TABLE static").is_err());
        assert!(guard("SELECT 1; DELETE FROM static").is_err());
        assert!(guard("").is_err());
        assert!(guard("SELECT replace(name, 'a', 'b') FROM static").is_err());
    }

    #[test]
    fn rendering_caps() {
        let cols = vec!["a".to_string(), "bb".to_string()];
        let rows = vec![vec![Some("1".into()), None]];
        assert_eq!(render_rows(&cols, &rows, false), "a | bb\n- | ----\n1 | NULL\n");
    }
}
