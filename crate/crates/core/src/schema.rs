//! Interface descriptions and Cap'n Proto schema text generation.
//!
//! Method names are written in snake_case and emitted in camelCase; type
//! and enum names become PascalCase; enum variants become camelCase.
//! Ordinals are declaration positions starting at 0.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

pub const UNIT: &str = "unit";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Method {
    pub name: String,
    pub params: Vec<String>,
    pub returns: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumDef {
    pub name: String,
    pub variants: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterfaceSpec {
    pub interface_name: String,
    pub methods: Vec<Method>,
    pub enums: Vec<EnumDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undeclared type `{ty}` in method `{method}`")]
    UndeclaredType { method: String, ty: String },
    #[error("duplicate method `{0}`")]
    DuplicateMethod(String),
    #[error("duplicate enum `{0}`")]
    DuplicateEnum(String),
    #[error("duplicate variant `{variant}` in enum `{name}`")]
    DuplicateVariant { name: String, variant: String },
    #[error("enum `{0}` has no variants")]
    EmptyEnum(String),
    #[error("sum types and refinement types are unsupported: `{0}`")]
    Unsupported(String),
    #[error("file id must be hexadecimal: `{0}`")]
    BadFileId(String),
    #[error("cannot read interface file: {0}")]
    Io(String),
}

impl InterfaceSpec {
    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut enums = HashSet::new();
        for e in &self.enums {
            if !enums.insert(e.name.as_str()) {
                return Err(SchemaError::DuplicateEnum(e.name.clone()));
            }
            if e.variants.is_empty() {
                return Err(SchemaError::EmptyEnum(e.name.clone()));
            }
            let mut seen = HashSet::new();
            for v in &e.variants {
                if !seen.insert(v.as_str()) {
                    return Err(SchemaError::DuplicateVariant {
                        name: e.name.clone(),
                        variant: v.clone(),
                    });
                }
            }
        }
        let mut methods = HashSet::new();
        for m in &self.methods {
            if !methods.insert(m.name.as_str()) {
                return Err(SchemaError::DuplicateMethod(m.name.clone()));
            }
            for ty in m.params.iter().chain(&m.returns) {
                if ty != UNIT && !enums.contains(ty.as_str()) {
                    return Err(SchemaError::UndeclaredType {
                        method: m.name.clone(),
                        ty: ty.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Render back into the interface file format.
    pub fn to_iface(&self) -> String {
        let mut out = format!("interface {}\n", self.interface_name);
        for m in &self.methods {
            let _ = write!(out, "method {}({})", m.name, m.params.join(", "));
            if let Some(r) = &m.returns {
                let _ = write!(out, " -> {r}");
            }
            out.push('\n');
        }
        for e in &self.enums {
            let _ = writeln!(out, "enum {} {{ {} }}", e.name, e.variants.join(", "));
        }
        out
    }
}

/// The warehouse RPC interface.
pub fn hbw_interface_spec() -> InterfaceSpec {
    let method = |name: &str, ret: Option<&str>| Method {
        name: name.to_string(),
        params: vec!["color".to_string()],
        returns: ret.map(str::to_string),
    };
    let enum_def = |name: &str, variants: &[&str]| EnumDef {
        name: name.to_string(),
        variants: variants.iter().map(|v| v.to_string()).collect(),
    };
    InterfaceSpec {
        interface_name: "hbw_rpc".to_string(),
        methods: vec![
            method("store_request", Some("store_response")),
            method("retrieve_request", Some("retrieve_response")),
            method("store", None),
            method("retrieve", None),
        ],
        enums: vec![
            enum_def("retrieve_response", &["has_color", "does_not_have_color"]),
            enum_def("store_response", &["not_full", "is_full"]),
            enum_def("color", &["red", "white", "blue"]),
        ],
    }
}

fn words(name: &str) -> impl Iterator<Item = &str> {
    name.split('_').filter(|w| !w.is_empty())
}

fn capitalize(w: &str) -> String {
    let mut cs = w.chars();
    match cs.next() {
        Some(c) => c.to_uppercase().chain(cs).collect(),
        None => String::new(),
    }
}

pub fn pascal_case(name: &str) -> String {
    words(name).map(capitalize).collect()
}

pub fn camel_case(name: &str) -> String {
    let mut ws = words(name);
    let mut out = ws.next().map(str::to_string).unwrap_or_default();
    out.extend(ws.map(capitalize));
    out
}

fn type_name(ty: &str) -> String {
    if ty == UNIT {
        "Void".to_string()
    } else {
        pascal_case(ty)
    }
}

/// Emit Cap'n Proto schema text for `spec`.
pub fn gen_capnp(spec: &InterfaceSpec) -> Result<String, SchemaError> {
    spec.validate()?;
    let mut out = String::new();
    let _ = writeln!(out, "interface {} {{", pascal_case(&spec.interface_name));
    for (ordinal, m) in spec.methods.iter().enumerate() {
        let params: Vec<String> = m
            .params
            .iter()
            .enumerate()
            .map(|(i, ty)| format!("_{i}:{}", type_name(ty)))
            .collect();
        let _ = write!(out, "  {} @{ordinal}({})", camel_case(&m.name), params.join(", "));
        match m.returns.as_deref() {
            Some(r) if r != UNIT => {
                let _ = write!(out, " -> {}", type_name(r));
            }
            _ => {}
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
    for e in &spec.enums {
        let variants: String = e
            .variants
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{} @ {i}; ", camel_case(v)))
            .collect();
        let _ = writeln!(out, "\nstruct {} {{", pascal_case(&e.name));
        let _ = writeln!(out, "  enum V {{{}}}", variants.trim_end());
        out.push_str("  v @ 0 : V;\n}\n");
    }
    Ok(out)
}

/// [`gen_capnp`] with an `@0x<hex>;` file id line in front.
pub fn gen_capnp_with_file_id(spec: &InterfaceSpec, file_id: Option<&str>) -> Result<String, SchemaError> {
    let body = gen_capnp(spec)?;
    match file_id {
        None => Ok(body),
        Some(id) => {
            let hex = id.trim_start_matches("0x");
            if hex.is_empty() || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(SchemaError::BadFileId(id.to_string()));
            }
            Ok(format!("@0x{hex};\n{body}"))
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn column_of(line: &str, needle: &str) -> usize {
    line.find(needle).map_or(1, |b| line[..b].chars().count() + 1)
}

/// Parse the line-oriented interface description format:
///
/// ```text
/// interface <name>
/// method <snake_name>(<type>, ...) [-> <type>]
/// enum <name> { <variant>, <variant>, ... }
/// ```
pub fn parse_interface(text: &str) -> Result<InterfaceSpec, SchemaError> {
    let mut name: Option<String> = None;
    let mut methods = Vec::new();
    let mut enums = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("");
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let syntax = |needle: &str, message: String| SchemaError::Syntax {
            line: line_no,
            column: column_of(line, needle),
            message,
        };
        let (keyword, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
        let rest = rest.trim();
        match keyword {
            "interface" => {
                if name.is_some() {
                    return Err(syntax(keyword, "second `interface` declaration".into()));
                }
                if !is_ident(rest) {
                    return Err(syntax(rest, format!("bad interface name `{rest}`")));
                }
                name = Some(rest.to_string());
            }
            "method" => {
                let open = rest
                    .find('(')
                    .ok_or_else(|| syntax(rest, "expected `(` after method name".into()))?;
                let close = rest
                    .rfind(')')
                    .ok_or_else(|| syntax(rest, "expected `)`".into()))?;
                if close < open {
                    return Err(syntax(")", "unbalanced parentheses".into()));
                }
                let mname = rest[..open].trim();
                if !is_ident(mname) {
                    return Err(syntax(rest, format!("bad method name `{mname}`")));
                }
                let params: Vec<String> = rest[open + 1..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(|p| parse_type(p, line_no, column_of(line, p)))
                    .collect::<Result<_, _>>()?;
                let tail = rest[close + 1..].trim();
                let returns = if tail.is_empty() {
                    None
                } else if let Some(r) = tail.strip_prefix("->") {
                    let r = r.trim();
                    // `-> unit` is the same as no return clause.
                    Some(parse_type(r, line_no, column_of(line, r))?).filter(|t| t != UNIT)
                } else {
                    return Err(syntax(tail, format!("unexpected `{tail}`")));
                };
                methods.push(Method {
                    name: mname.to_string(),
                    params,
                    returns,
                });
            }
            "enum" => {
                let open = rest
                    .find('{')
                    .ok_or_else(|| syntax(rest, "expected `{` after enum name".into()))?;
                let body = rest[open + 1..]
                    .strip_suffix('}')
                    .ok_or_else(|| syntax(rest, "expected `}` at end of enum".into()))?;
                let ename = rest[..open].trim();
                if !is_ident(ename) {
                    return Err(syntax(rest, format!("bad enum name `{ename}`")));
                }
                let mut variants = Vec::new();
                for v in body.split([',', ';']).map(str::trim).filter(|v| !v.is_empty()) {
                    if v.contains(" of ") || v.contains('(') || v.contains(':') {
                        return Err(SchemaError::Unsupported(v.to_string()));
                    }
                    if !is_ident(v) {
                        return Err(syntax(v, format!("bad variant `{v}`")));
                    }
                    variants.push(v.to_string());
                }
                enums.push(EnumDef {
                    name: ename.to_string(),
                    variants,
                });
            }
            other => return Err(syntax(other, format!("unknown keyword `{other}`"))),
        }
    }

    let spec = InterfaceSpec {
        interface_name: name.ok_or(SchemaError::Syntax {
            line: 1,
            column: 1,
            message: "missing `interface` declaration".into(),
        })?,
        methods,
        enums,
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_type(s: &str, line: usize, column: usize) -> Result<String, SchemaError> {
    if s.contains(['{', '|']) {
        return Err(SchemaError::Unsupported(s.to_string()));
    }
    if is_ident(s) {
        Ok(s.to_string())
    } else {
        Err(SchemaError::Syntax {
            line,
            column,
            message: format!("bad type `{s}`"),
        })
    }
}

pub fn parse_interface_file(path: impl AsRef<Path>) -> Result<InterfaceSpec, SchemaError> {
    let text = fs::read_to_string(path).map_err(|e| SchemaError::Io(e.to_string()))?;
    parse_interface(&text)
}
