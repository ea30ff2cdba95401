use std::collections::HashSet;

use thiserror::Error;

use super::{Axis, LabelTest, NodeId, PatternNode, Query, RelationAtom, TreePattern, Variable};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("duplicate atom name `{0}`")]
    DuplicateName(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Name(String),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Slash,
    DoubleSlash,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Slash => "`/`".into(),
            Tok::DoubleSlash => "`//`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut advance = |i: &mut usize, n: usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        match c {
            c if c.is_whitespace() => advance(&mut i, 1),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    advance(&mut i, 1);
                }
            }
            '(' | ')' | '[' | ']' | ',' | ';' | ':' => {
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    _ => Tok::Colon,
                };
                advance(&mut i, 1);
                out.push(Spanned { tok, line: tl, col: tc });
            }
            '/' => {
                if chars.get(i + 1) == Some(&'/') {
                    advance(&mut i, 2);
                    out.push(Spanned { tok: Tok::DoubleSlash, line: tl, col: tc });
                } else {
                    advance(&mut i, 1);
                    out.push(Spanned { tok: Tok::Slash, line: tl, col: tc });
                }
            }
            '"' => {
                advance(&mut i, 1);
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err(err(tl, tc, "unterminated string".into())),
                        Some('"') => {
                            advance(&mut i, 1);
                            break;
                        }
                        Some('\\') => {
                            let esc = *chars
                                .get(i + 1)
                                .ok_or_else(|| err(tl, tc, "unterminated string".into()))?;
                            s.push(esc);
                            advance(&mut i, 2);
                        }
                        Some(&ch) => {
                            s.push(ch);
                            advance(&mut i, 1);
                        }
                    }
                }
                out.push(Spanned { tok: Tok::Str(s), line: tl, col: tc });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    s.push(chars[i]);
                    advance(&mut i, 1);
                }
                out.push(Spanned { tok: Tok::Name(s), line: tl, col: tc });
            }
            other => return Err(err(tl, tc, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    next_id: u32,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError::Syntax { line: s.line, col: s.col, msg: msg.into() }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", want.describe(), self.peek().describe())))
        }
    }

    fn name(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Name(n) => {
                self.bump();
                Ok(n)
            }
            other => Err(self.error(format!("expected a name, found {}", other.describe()))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Name(n) if n == kw => {
                self.bump();
                Ok(())
            }
            other => Err(self.error(format!("expected `{kw}`, found {}", other.describe()))),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected a quoted path, found {}", other.describe()))),
        }
    }

    fn varlist(&mut self) -> Result<Vec<Variable>, ParseError> {
        let mut vars = vec![Variable::new(self.name()?)];
        while *self.peek() == Tok::Comma {
            self.bump();
            vars.push(Variable::new(self.name()?));
        }
        Ok(vars)
    }

    fn test(&mut self) -> Result<LabelTest, ParseError> {
        if *self.peek() == Tok::Colon {
            self.bump();
            return Ok(LabelTest::Variable(Variable::new(self.name()?)));
        }
        let constant = self.name()?;
        if *self.peek() == Tok::Colon {
            self.bump();
            return Ok(LabelTest::Both(constant, Variable::new(self.name()?)));
        }
        Ok(LabelTest::Constant(constant))
    }

    fn step(&mut self, axis: Option<Axis>) -> Result<PatternNode, ParseError> {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        let test = self.test()?;
        let mut node = PatternNode::leaf(id, test, axis);
        while *self.peek() == Tok::LBracket {
            self.bump();
            let axis = if *self.peek() == Tok::DoubleSlash {
                self.bump();
                Axis::Descendant
            } else {
                Axis::Child
            };
            node.children.push(self.step(Some(axis))?);
            self.expect(Tok::RBracket)?;
        }
        match self.peek() {
            Tok::Slash => {
                self.bump();
                node.children.push(self.step(Some(Axis::Child))?);
            }
            Tok::DoubleSlash => {
                self.bump();
                node.children.push(self.step(Some(Axis::Descendant))?);
            }
            _ => {}
        }
        Ok(node)
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        let mut q = Query::default();
        let mut names = HashSet::new();
        loop {
            match self.peek().clone() {
                Tok::Name(kw) if kw == "REL" => {
                    self.bump();
                    let name = self.name()?;
                    self.expect(Tok::LParen)?;
                    let attributes = self.varlist()?;
                    self.expect(Tok::RParen)?;
                    self.keyword("FROM")?;
                    let source = self.string()?;
                    self.expect(Tok::Semi)?;
                    if !names.insert(name.clone()) {
                        return Err(ParseError::DuplicateName(name));
                    }
                    q.relations.push(RelationAtom { name, attributes, source });
                }
                Tok::Name(kw) if kw == "TREE" => {
                    self.bump();
                    let name = self.name()?;
                    self.keyword("FROM")?;
                    let source = self.string()?;
                    self.keyword("MATCH")?;
                    let root = self.step(None)?;
                    self.expect(Tok::Semi)?;
                    if !names.insert(name.clone()) {
                        return Err(ParseError::DuplicateName(name));
                    }
                    q.patterns.push(TreePattern { name, source, root });
                }
                Tok::Name(kw) if kw == "RETURN" => {
                    if q.relations.is_empty() && q.patterns.is_empty() {
                        return Err(self.error("expected at least one REL or TREE statement"));
                    }
                    self.bump();
                    q.return_vars = self.varlist()?;
                    if *self.peek() == Tok::Semi {
                        self.bump();
                    }
                    if *self.peek() != Tok::Eof {
                        return Err(self.error(format!(
                            "unexpected {} after RETURN list",
                            self.peek().describe()
                        )));
                    }
                    return Ok(q);
                }
                other => {
                    return Err(self.error(format!(
                        "expected `REL`, `TREE` or `RETURN`, found {}",
                        other.describe()
                    )))
                }
            }
        }
    }
}

/// Parses the textual query language. Pattern node ids are assigned in
/// pre-order across patterns, starting at 0.
pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0, next_id: 0 }.query()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_child_query_parses() {
        let q = parse_query(
            r#"REL R1(b,c) FROM "r1.csv"; TREE T FROM "d.xml" MATCH :a[:b]/:c; RETURN a,b,c"#,
        )
        .unwrap();
        assert_eq!(q.relations.len(), 1);
        assert_eq!(q.relations[0].attributes, vec![Variable::new("b"), Variable::new("c")]);
        assert_eq!(q.patterns.len(), 1);
        let root = &q.patterns[0].root;
        assert_eq!(root.test, LabelTest::Variable(Variable::new("a")));
        assert_eq!(root.children.len(), 2);
        assert!(root.children.iter().all(|c| c.axis == Some(Axis::Child)));
        assert_eq!(q.return_vars.len(), 3);
    }

    #[test]
    fn pattern_free_query() {
        let q = parse_query(r#"REL R(a) FROM "r.csv"; RETURN a"#).unwrap();
        assert!(q.patterns.is_empty());
        assert_eq!(q.relations.len(), 1);
    }

    #[test]
    fn descendant_edge_and_tests() {
        let q = parse_query(
            "# comment\nTREE T FROM \"d.xml\" MATCH :a//:c; RETURN a,c",
        )
        .unwrap();
        let root = &q.patterns[0].root;
        assert_eq!(root.children[0].axis, Some(Axis::Descendant));

        let q = parse_query(r#"TREE T FROM "d.json" MATCH item[//k:v]/x; RETURN v"#).unwrap();
        let root = &q.patterns[0].root;
        assert_eq!(root.test, LabelTest::Constant("item".into()));
        assert_eq!(root.children[0].test, LabelTest::Both("k".into(), Variable::new("v")));
        assert_eq!(root.children[0].axis, Some(Axis::Descendant));
        assert_eq!(root.children[1].axis, Some(Axis::Child));
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_query("REL R(a) FROM r.csv; RETURN a").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 1, col: 16, .. }), "{err:?}");

        let err = parse_query("TREE T FROM \"x\"\n  MATCH :a[:b; RETURN a").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = parse_query(r#"REL R(a) FROM "x"; REL R(b) FROM "y"; RETURN a"#).unwrap_err();
        assert_eq!(err, ParseError::DuplicateName("R".into()));
        let err =
            parse_query(r#"REL R(a) FROM "x"; TREE R FROM "y" MATCH :a; RETURN a"#).unwrap_err();
        assert_eq!(err, ParseError::DuplicateName("R".into()));
    }
}
