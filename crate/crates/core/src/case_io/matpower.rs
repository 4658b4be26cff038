//! Reader and writer for the MATPOWER `.m` case subset.
//!
//! Only assignments of the form `mpc.<field> = <value>;` are interpreted. Values
//! may be numbers, quoted strings, numeric matrices `[...]` or cell arrays
//! `{...}`; the last two may span lines. `%` starts a comment, `...` continues
//! a line, and the `function` header line is ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

/// Minimum column counts of the MATPOWER tables.
pub const BUS_COLUMNS: usize = 13;
pub const GEN_COLUMNS: usize = 10;
pub const BRANCH_COLUMNS: usize = 13;

/// Rectangular numeric table with the source line of every row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub rows: Vec<Vec<f64>>,
    /// 1-based source line of each row; 0 when the table was built in memory.
    pub lines: Vec<usize>,
}

impl Table {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let lines = vec![0; rows.len()];
        Self { rows, lines }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Source line of a row, if known.
    pub fn line_of(&self, row: usize) -> Option<usize> {
        self.lines.get(row).copied().filter(|&l| l > 0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaseDocument {
    pub name: String,
    pub base_mva: f64,
    pub bus: Table,
    pub gen: Table,
    pub branch: Table,
    pub gencost: Option<Table>,
    /// Other numeric matrices, kept only with [`ParseOptions::preserve_unknown`].
    pub extra: BTreeMap<String, Table>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub preserve_unknown: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {at}: {message}")]
    Syntax { at: Location, message: String },
    #[error("non-numeric cell {token:?} at {at}")]
    NonNumeric { at: Location, token: String },
    #[error("missing required field mpc.{0}")]
    MissingMatrix(&'static str),
    #[error("mpc.{table} row {row} at line {line} has {found} columns, expected at least {expected}")]
    ShortRow { table: &'static str, row: usize, line: usize, found: usize, expected: usize },
    #[error("mpc.{table} row {row} at line {line} has {found} columns, row 1 has {expected}")]
    Ragged { table: &'static str, row: usize, line: usize, found: usize, expected: usize },
    #[error("{table} row {row} at line {line} references unknown bus {bus}")]
    UnknownBus { table: &'static str, row: usize, line: usize, bus: f64 },
    #[error("mpc.baseMVA must be a positive number, found {0}")]
    BaseMva(f64),
}

pub fn parse_matpower(text: &str) -> Result<CaseDocument, ParseError> {
    parse_matpower_with(text, ParseOptions::default())
}

pub fn parse_matpower_with(text: &str, opts: ParseOptions) -> Result<CaseDocument, ParseError> {
    let mut lx = Lexer::new(text);
    let mut doc = CaseDocument::default();
    let mut base_mva = None;
    let (mut bus, mut gen, mut branch) = (None, None, None);

    loop {
        lx.skip_trivia(true);
        let Some(c) = lx.peek() else { break };
        if c == ';' {
            lx.bump();
            continue;
        }
        if !is_ident_start(c) {
            return Err(lx.syntax(format!("unexpected character {c:?}")));
        }
        let at = lx.location();
        let ident = lx.ident();
        if ident == "function" {
            let header = lx.rest_of_line();
            if let Some(name) = header.split('=').nth(1) {
                doc.name = name.trim().to_string();
            }
            continue;
        }
        lx.skip_trivia(false);
        if lx.peek() != Some('=') {
            return Err(Lexer::syntax_at(at, format!("expected '=' after {ident}")));
        }
        lx.bump();
        lx.skip_trivia(false);
        let field = ident.strip_prefix("mpc.").unwrap_or(&ident).to_string();
        match lx.peek() {
            Some('[') => {
                let table = lx.matrix()?;
                match field.as_str() {
                    "bus" => bus = Some(table),
                    "gen" => gen = Some(table),
                    "branch" => branch = Some(table),
                    "gencost" => doc.gencost = Some(table),
                    "baseMVA" => return Err(Lexer::syntax_at(at, "baseMVA must be a scalar".into())),
                    _ if opts.preserve_unknown => {
                        doc.extra.insert(field, table);
                    }
                    _ => {}
                }
            }
            Some('{') => lx.skip_group('{', '}')?,
            Some('\'') | Some('"') => {
                lx.string()?;
            }
            Some(_) => {
                let at = lx.location();
                let tok = lx.word();
                if tok.is_empty() {
                    return Err(lx.syntax("expected a value".into()));
                }
                if field == "baseMVA" {
                    let v = parse_number(&tok).ok_or(ParseError::NonNumeric { at, token: tok })?;
                    base_mva = Some(v);
                }
            }
            None => return Err(lx.syntax("unexpected end of input".into())),
        }
        lx.skip_trivia(false);
        match lx.peek() {
            Some(';') | Some('\n') | None => {}
            Some(c) => return Err(lx.syntax(format!("unexpected {c:?} after value"))),
        }
    }

    let base_mva = base_mva.ok_or(ParseError::MissingMatrix("baseMVA"))?;
    if !(base_mva.is_finite() && base_mva > 0.0) {
        return Err(ParseError::BaseMva(base_mva));
    }
    doc.base_mva = base_mva;
    doc.bus = bus.ok_or(ParseError::MissingMatrix("bus"))?;
    doc.gen = gen.ok_or(ParseError::MissingMatrix("gen"))?;
    doc.branch = branch.ok_or(ParseError::MissingMatrix("branch"))?;
    check_shape(&doc.bus, "bus", BUS_COLUMNS)?;
    check_shape(&doc.gen, "gen", GEN_COLUMNS)?;
    check_shape(&doc.branch, "branch", BRANCH_COLUMNS)?;
    check_references(&doc)?;
    Ok(doc)
}

fn check_shape(table: &Table, name: &'static str, min: usize) -> Result<(), ParseError> {
    let Some(first) = table.rows.first() else { return Ok(()) };
    for (k, row) in table.rows.iter().enumerate() {
        let line = table.lines[k];
        if row.len() < min {
            return Err(ParseError::ShortRow { table: name, row: k + 1, line, found: row.len(), expected: min });
        }
        if row.len() != first.len() {
            return Err(ParseError::Ragged { table: name, row: k + 1, line, found: row.len(), expected: first.len() });
        }
    }
    Ok(())
}

fn check_references(doc: &CaseDocument) -> Result<(), ParseError> {
    let ids: Vec<f64> = doc.bus.rows.iter().map(|r| r[0]).collect();
    let known = |b: f64| ids.iter().any(|&id| id == b);
    for (k, row) in doc.gen.rows.iter().enumerate() {
        if !known(row[0]) {
            return Err(ParseError::UnknownBus { table: "gen", row: k + 1, line: doc.gen.lines[k], bus: row[0] });
        }
    }
    for (k, row) in doc.branch.rows.iter().enumerate() {
        for &b in &row[..2] {
            if !known(b) {
                return Err(ParseError::UnknownBus { table: "branch", row: k + 1, line: doc.branch.lines[k], bus: b });
            }
        }
    }
    Ok(())
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn is_word_char(c: char) -> bool {
    !(c.is_whitespace() || matches!(c, ',' | ';' | '[' | ']' | '{' | '}' | '%' | '\'' | '"'))
}

/// Parses one numeric cell. Accepts MATLAB's `Inf`/`NaN` spellings; the decimal
/// separator is always `.`.
fn parse_number(tok: &str) -> Option<f64> {
    let body = tok.trim_start_matches(['+', '-']);
    let valid = match body.to_ascii_lowercase().as_str() {
        "inf" | "nan" => true,
        b => !b.is_empty() && b.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | '+' | '-')),
    };
    if !valid || tok.matches(['+', '-']).count() > 2 {
        return None;
    }
    tok.parse::<f64>().ok()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

impl Lexer {
    fn new(src: &str) -> Self {
        Self { chars: src.chars().collect(), pos: 0, line: 1, column: 1 }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn location(&self) -> Location {
        Location { line: self.line, column: self.column }
    }

    fn syntax(&self, message: String) -> ParseError {
        Self::syntax_at(self.location(), message)
    }

    fn syntax_at(at: Location, message: String) -> ParseError {
        ParseError::Syntax { at, message }
    }

    fn skip_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.bump();
        }
    }

    /// `...` continuation: skip to and including the newline.
    fn at_continuation(&self) -> bool {
        self.peek() == Some('.') && self.peek_at(1) == Some('.') && self.peek_at(2) == Some('.')
    }

    /// Skips blanks, comments and continuations; newlines only when `newlines`.
    fn skip_trivia(&mut self, newlines: bool) {
        while let Some(c) = self.peek() {
            if c == '%' {
                self.skip_comment();
            } else if self.at_continuation() {
                self.skip_comment();
                self.bump();
            } else if c == '\n' && !newlines {
                break;
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn ident(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if !is_ident_char(c) || self.at_continuation() {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if !is_word_char(c) || self.at_continuation() {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn rest_of_line(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c == '\n' || c == '%' {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn string(&mut self) -> Result<String, ParseError> {
        let at = self.location();
        let quote = self.bump().unwrap_or('\'');
        let mut s = String::new();
        loop {
            match self.bump() {
                Some(c) if c == quote => {
                    if self.peek() == Some(quote) {
                        self.bump();
                        s.push(quote);
                    } else {
                        return Ok(s);
                    }
                }
                Some('\n') | None => return Err(Self::syntax_at(at, "unterminated string".into())),
                Some(c) => s.push(c),
            }
        }
    }

    fn skip_group(&mut self, open: char, close: char) -> Result<(), ParseError> {
        let at = self.location();
        let mut depth = 0usize;
        while let Some(c) = self.peek() {
            match c {
                '%' => self.skip_comment(),
                '\'' | '"' => {
                    self.string()?;
                }
                _ => {
                    self.bump();
                    if c == open {
                        depth += 1;
                    } else if c == close {
                        depth -= 1;
                        if depth == 0 {
                            return Ok(());
                        }
                    }
                }
            }
        }
        Err(Self::syntax_at(at, format!("unterminated '{open}'")))
    }

    fn matrix(&mut self) -> Result<Table, ParseError> {
        let open = self.location();
        self.bump();
        let mut table = Table::default();
        let mut row: Vec<f64> = Vec::new();
        let mut row_line = 0;
        let finish_row = |row: &mut Vec<f64>, row_line: usize, table: &mut Table| {
            if !row.is_empty() {
                table.rows.push(std::mem::take(row));
                table.lines.push(row_line);
            }
        };
        loop {
            self.skip_trivia(false);
            let Some(c) = self.peek() else {
                return Err(Self::syntax_at(open, "unterminated matrix".into()));
            };
            match c {
                ']' => {
                    self.bump();
                    finish_row(&mut row, row_line, &mut table);
                    return Ok(table);
                }
                ';' | '\n' => {
                    self.bump();
                    finish_row(&mut row, row_line, &mut table);
                }
                ',' => {
                    self.bump();
                }
                _ => {
                    let at = self.location();
                    let tok = self.word();
                    if tok.is_empty() {
                        return Err(Self::syntax_at(at, format!("unexpected {c:?} in matrix")));
                    }
                    let v = parse_number(&tok).ok_or(ParseError::NonNumeric { at: at.clone(), token: tok })?;
                    if row.is_empty() {
                        row_line = at.line;
                    }
                    row.push(v);
                }
            }
        }
    }
}

fn render_number(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "Inf".into() } else { "-Inf".into() }
    } else {
        // Rust's shortest representation parses back to the same double.
        format!("{v}")
    }
}

fn render_table(out: &mut String, name: &str, table: &Table) {
    let _ = writeln!(out, "mpc.{name} = [");
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|&v| render_number(v)).collect();
        let _ = writeln!(out, "\t{};", cells.join("\t"));
    }
    let _ = writeln!(out, "];\n");
}

/// Writes a document back as MATPOWER text. `parse_matpower(render(doc))`
/// reproduces every table value exactly.
pub fn render(doc: &CaseDocument) -> String {
    let mut out = String::new();
    let name = if doc.name.is_empty() { "case" } else { doc.name.as_str() };
    let _ = writeln!(out, "function mpc = {name}\n");
    let _ = writeln!(out, "mpc.version = '2';\n");
    let _ = writeln!(out, "mpc.baseMVA = {};\n", render_number(doc.base_mva));
    render_table(&mut out, "bus", &doc.bus);
    render_table(&mut out, "gen", &doc.gen);
    render_table(&mut out, "branch", &doc.branch);
    if let Some(gc) = &doc.gencost {
        render_table(&mut out, "gencost", gc);
    }
    for (name, table) in &doc.extra {
        render_table(&mut out, name, table);
    }
    out
}
