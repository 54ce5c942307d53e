//! The line-oriented rule language.
//!
//! ```text
//! rule      := "IF" clause ("UNLESS" clause)* "THEN" "class" target
//! clause    := predicate ("AND" predicate)*
//! predicate := IDENT OP literal          OP in = != < <= > >=
//! target    := "=" LABEL | "~" "{" LABEL ":" PROB ("," LABEL ":" PROB)* "}"
//! ```
//!
//! One rule per line, `#` starts a comment. Keywords are case-insensitive.
//! Identifiers that are not plain words may be written in backticks; string
//! literals use double quotes with `\"` and `\\` escapes. Labels may be bare
//! words or quoted. Rule ids are `r1`, `r2`, ... in file order.

use std::fmt;

use crate::data::{Schema, Value};

use super::{Clause, FeedbackRule, FeedbackRuleSet, LabelDistribution, Op, Predicate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Backticked(String),
    Num(f64),
    Op(Op),
    Tilde,
    LBrace,
    RBrace,
    Colon,
    Comma,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Quoted(s) => write!(f, "string \"{s}\""),
            Tok::Backticked(s) => write!(f, "`{s}`"),
            Tok::Num(x) => write!(f, "number {x}"),
            Tok::Op(op) => write!(f, "`{op}`"),
            Tok::Tilde => f.write_str("`~`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Comma => f.write_str("`,`"),
        }
    }
}

struct Spanned {
    tok: Tok,
    column: usize,
}

fn is_word_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

fn lex_line(line: &str, line_no: usize) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let err = |column: usize, message: String| ParseError {
        line: line_no,
        column,
        message,
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let tok = match c {
            '~' => {
                i += 1;
                Tok::Tilde
            }
            '{' => {
                i += 1;
                Tok::LBrace
            }
            '}' => {
                i += 1;
                Tok::RBrace
            }
            ':' => {
                i += 1;
                Tok::Colon
            }
            ',' => {
                i += 1;
                Tok::Comma
            }
            '=' => {
                i += if chars.get(i + 1) == Some(&'=') { 2 } else { 1 };
                Tok::Op(Op::Eq)
            }
            '!' => {
                if chars.get(i + 1) != Some(&'=') {
                    return Err(err(column, "expected `!=`".into()));
                }
                i += 2;
                Tok::Op(Op::Ne)
            }
            '<' | '>' => {
                let eq = chars.get(i + 1) == Some(&'=');
                i += if eq { 2 } else { 1 };
                Tok::Op(match (c, eq) {
                    ('<', false) => Op::Lt,
                    ('<', true) => Op::Le,
                    ('>', false) => Op::Gt,
                    _ => Op::Ge,
                })
            }
            '"' | '`' => {
                let quote = c;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err(column, "unterminated quoted text".into())),
                        Some(&ch) if ch == quote => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let next = chars
                                .get(i + 1)
                                .ok_or_else(|| err(i + 1, "dangling escape".into()))?;
                            s.push(*next);
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                if quote == '"' {
                    Tok::Quoted(s)
                } else {
                    Tok::Backticked(s)
                }
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let ch = chars[i];
                    let exp_sign =
                        (ch == '-' || ch == '+') && matches!(chars[i - 1], 'e' | 'E');
                    if ch.is_ascii_digit() || ch == '.' || ch == 'e' || ch == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let x: f64 = text
                    .parse()
                    .map_err(|_| err(column, format!("malformed number `{text}`")))?;
                Tok::Num(x)
            }
            c if is_word_start(c) => {
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                Tok::Word(chars[start..i].iter().collect())
            }
            other => return Err(err(column, format!("unexpected character `{other}`"))),
        };
        out.push(Spanned { tok, column });
    }
    Ok(out)
}

struct LineParser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    line: usize,
    end_column: usize,
    schema: &'a Schema,
}

impl<'a> LineParser<'a> {
    fn err(&self, column: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn column(&self) -> usize {
        self.toks
            .get(self.pos)
            .map_or(self.end_column, |t| t.column)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self, what: &str) -> Result<(Tok, usize), ParseError> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok((t.tok.clone(), t.column))
            }
            None => Err(self.err(self.end_column, format!("expected {what}, found end of line"))),
        }
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let (tok, col) = self.next(kw)?;
        match tok {
            Tok::Word(w) if w.eq_ignore_ascii_case(kw) => Ok(()),
            other => Err(self.err(col, format!("expected `{kw}`, found {other}"))),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let (tok, col) = self.next(&want.to_string())?;
        if tok == want {
            Ok(())
        } else {
            Err(self.err(col, format!("expected {want}, found {tok}")))
        }
    }

    fn predicate(&mut self) -> Result<Predicate, ParseError> {
        let (tok, col) = self.next("an attribute name")?;
        let name = match tok {
            Tok::Word(w) | Tok::Backticked(w) => w,
            other => return Err(self.err(col, format!("expected an attribute name, found {other}"))),
        };
        let attr = self
            .schema
            .attribute_index(&name)
            .ok_or_else(|| self.err(col, format!("unknown attribute `{name}`")))?;
        let (tok, op_col) = self.next("an operator")?;
        let Tok::Op(op) = tok else {
            return Err(self.err(op_col, format!("expected an operator, found {tok}")));
        };
        let (lit, lit_col) = self.next("a value")?;
        let attribute = &self.schema.attributes[attr];
        let value = if attribute.is_numeric() {
            if !op.allowed_for_numeric() {
                return Err(self.err(
                    op_col,
                    format!("operator `{op}` is not allowed on numeric attribute `{name}`"),
                ));
            }
            match lit {
                Tok::Num(x) => Value::Num(x),
                other => {
                    return Err(self.err(
                        lit_col,
                        format!("numeric attribute `{name}` needs a number, found {other}"),
                    ))
                }
            }
        } else {
            if !op.allowed_for_categorical() {
                return Err(self.err(
                    op_col,
                    format!("operator `{op}` is not allowed on categorical attribute `{name}`"),
                ));
            }
            match lit {
                Tok::Quoted(s) => Value::Cat(attribute.category_index(&s).ok_or_else(|| {
                    self.err(lit_col, format!("`{s}` is not a category of `{name}`"))
                })?),
                other => {
                    return Err(self.err(
                        lit_col,
                        format!("categorical attribute `{name}` needs a quoted string, found {other}"),
                    ))
                }
            }
        };
        Ok(Predicate { attr, op, value })
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let mut predicates = vec![self.predicate()?];
        while self.peek_keyword("AND") {
            self.pos += 1;
            predicates.push(self.predicate()?);
        }
        Ok(Clause { predicates })
    }

    fn label(&mut self) -> Result<usize, ParseError> {
        let (tok, col) = self.next("a class label")?;
        let name = match tok {
            Tok::Word(w) | Tok::Quoted(w) | Tok::Backticked(w) => w,
            other => return Err(self.err(col, format!("expected a class label, found {other}"))),
        };
        self.schema
            .class_index(&name)
            .ok_or_else(|| self.err(col, format!("unknown class label `{name}`")))
    }

    fn rule(&mut self, id: String) -> Result<FeedbackRule, ParseError> {
        self.keyword("IF")?;
        let clause = self.clause()?;
        let mut exclusions = Vec::new();
        while self.peek_keyword("UNLESS") {
            self.pos += 1;
            exclusions.push(self.clause()?);
        }
        self.keyword("THEN")?;
        let (tok, col) = self.next("`class`")?;
        match tok {
            Tok::Word(w) if w.eq_ignore_ascii_case("class") || w == self.schema.label_name => {}
            Tok::Backticked(w) if w == self.schema.label_name => {}
            other => return Err(self.err(col, format!("expected `class`, found {other}"))),
        }
        let n = self.schema.n_classes();
        let (tok, col) = self.next("`=` or `~`")?;
        let distribution = match tok {
            Tok::Op(Op::Eq) => LabelDistribution::delta(self.label()?, n),
            Tok::Tilde => {
                let brace_col = self.column();
                self.expect(Tok::LBrace)?;
                let mut probs = vec![0.0; n];
                let mut seen = vec![false; n];
                loop {
                    let label_col = self.column();
                    let c = self.label()?;
                    if seen[c] {
                        return Err(self.err(label_col, "label listed twice"));
                    }
                    seen[c] = true;
                    self.expect(Tok::Colon)?;
                    let (tok, pcol) = self.next("a probability")?;
                    let Tok::Num(p) = tok else {
                        return Err(self.err(pcol, format!("expected a probability, found {tok}")));
                    };
                    if !(0.0..=1.0).contains(&p) {
                        return Err(self.err(pcol, format!("probability {p} outside [0, 1]")));
                    }
                    probs[c] = p;
                    let (tok, scol) = self.next("`,` or `}`")?;
                    match tok {
                        Tok::Comma => continue,
                        Tok::RBrace => break,
                        other => {
                            return Err(self.err(scol, format!("expected `,` or `}}`, found {other}")))
                        }
                    }
                }
                LabelDistribution::new(probs).map_err(|e| self.err(brace_col, e.to_string()))?
            }
            other => return Err(self.err(col, format!("expected `=` or `~`, found {other}"))),
        };
        if let Some(t) = self.toks.get(self.pos) {
            return Err(self.err(t.column, format!("unexpected {} after rule", t.tok)));
        }
        Ok(FeedbackRule {
            id,
            clause,
            exclusions,
            distribution,
        })
    }
}

/// Parses a rule file against `schema`.
pub fn parse_rule_set(text: &str, schema: &Schema) -> Result<FeedbackRuleSet, ParseError> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let toks = lex_line(line, i + 1)?;
        if toks.is_empty() {
            continue;
        }
        let mut parser = LineParser {
            toks,
            pos: 0,
            line: i + 1,
            end_column: line.chars().count() + 1,
            schema,
        };
        rules.push(parser.rule(format!("r{}", rules.len() + 1))?);
    }
    Ok(FeedbackRuleSet { rules })
}

const KEYWORDS: [&str; 4] = ["IF", "AND", "THEN", "UNLESS"];

fn render_ident(name: &str) -> String {
    let mut chars = name.chars();
    let plain = chars.next().is_some_and(is_word_start)
        && chars.all(is_word_char)
        && !KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(name));
    if plain {
        name.to_string()
    } else {
        format!("`{}`", name.replace('\\', "\\\\").replace('`', "\\`"))
    }
}

fn render_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn render_clause(clause: &Clause, schema: &Schema) -> String {
    clause
        .predicates
        .iter()
        .map(|p| {
            let a = &schema.attributes[p.attr];
            let value = match p.value {
                Value::Num(x) => format!("{x}"),
                Value::Cat(c) => render_string(&a.categories()[c]),
            };
            format!("{} {} {}", render_ident(&a.name), p.op, value)
        })
        .collect::<Vec<_>>()
        .join(" AND ")
}

/// Renders one rule as a single DSL line.
pub fn render_rule(rule: &FeedbackRule, schema: &Schema) -> String {
    let mut out = format!("IF {}", render_clause(&rule.clause, schema));
    for e in &rule.exclusions {
        out.push_str(" UNLESS ");
        out.push_str(&render_clause(e, schema));
    }
    out.push_str(" THEN class ");
    match rule.distribution.deterministic_class() {
        Some(c) => {
            out.push_str("= ");
            out.push_str(&render_string(&schema.classes[c]));
        }
        None => {
            let parts: Vec<String> = rule
                .distribution
                .probs()
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(c, p)| format!("{}: {p}", render_string(&schema.classes[c])))
                .collect();
            out.push_str(&format!("~ {{{}}}", parts.join(", ")));
        }
    }
    out
}

pub fn render_rule_set(frs: &FeedbackRuleSet, schema: &Schema) -> String {
    let mut out = String::new();
    for r in &frs.rules {
        out.push_str(&render_rule(r, schema));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Attribute;
    use proptest::prelude::*;

    fn schema() -> Schema {
        Schema::new(
            vec![
                Attribute::numeric("age"),
                Attribute::categorical("status", ["single", "married", "it's \"odd\""]),
                Attribute::numeric("marital-status.len"),
                Attribute::numeric("two words"),
            ],
            "class",
            vec!["approve".into(), "deny".into()],
        )
        .unwrap()
    }

    #[test]
    fn parses_deterministic_rule() {
        let s = schema();
        let frs =
            parse_rule_set("IF age < 29 AND status = \"single\" THEN class = \"approve\"", &s)
                .unwrap();
        assert_eq!(frs.rules.len(), 1);
        let r = &frs.rules[0];
        assert_eq!(r.id, "r1");
        assert_eq!(r.clause.predicates.len(), 2);
        assert_eq!(r.clause.predicates[0].op, Op::Lt);
        assert_eq!(r.clause.predicates[1].value, Value::Cat(0));
        assert_eq!(r.distribution.deterministic_class(), Some(0));
    }

    #[test]
    fn parses_probabilistic_rule_and_comments() {
        let s = schema();
        let text = "# feedback\n\nif age >= 40 then class ~ {approve: 0.8, deny: 0.2}  # trailing\n";
        let frs = parse_rule_set(text, &s).unwrap();
        assert_eq!(frs.rules.len(), 1);
        assert_eq!(frs.rules[0].distribution.probs(), &[0.8, 0.2]);
    }

    #[test]
    fn type_errors_carry_position() {
        let s = schema();
        let e = parse_rule_set("IF status < \"single\" THEN class = approve", &s).unwrap_err();
        assert_eq!((e.line, e.column), (1, 11));
        assert!(e.message.contains("categorical"), "{}", e.message);

        let e = parse_rule_set("\nIF age = \"x\" THEN class = approve", &s).unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_rule_set("IF age != 3 THEN class = approve", &s).unwrap_err();
        assert!(e.message.contains("numeric"));
        let e = parse_rule_set("IF height > 3 THEN class = approve", &s).unwrap_err();
        assert!(e.message.contains("unknown attribute"));
        let e = parse_rule_set("IF age > 3 THEN class = maybe", &s).unwrap_err();
        assert!(e.message.contains("unknown class"));
    }

    #[test]
    fn syntax_errors() {
        let s = schema();
        let e = parse_rule_set("IF age > 3 class = approve", &s).unwrap_err();
        assert!(e.message.contains("THEN"), "{}", e.message);
        let e = parse_rule_set("IF age > THEN class = approve", &s).unwrap_err();
        assert_eq!(e.column, 10);
        let e = parse_rule_set("IF age > 3 THEN class = approve extra", &s).unwrap_err();
        assert!(e.message.contains("after rule"));
        let e = parse_rule_set("IF status = \"single THEN class = approve", &s).unwrap_err();
        assert!(e.message.contains("unterminated"));
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let s = schema();
        let e = parse_rule_set("IF age > 3 THEN class ~ {approve: 0.7, deny: 0.2}", &s)
            .unwrap_err();
        assert!(e.message.contains("sum"), "{}", e.message);
        let e = parse_rule_set("IF age > 3 THEN class ~ {approve: 0.5, approve: 0.5}", &s)
            .unwrap_err();
        assert!(e.message.contains("twice"));
    }

    #[test]
    fn renders_exclusions_and_odd_names() {
        let s = schema();
        let text = "IF `two words` > -1.5 AND status != \"it's \\\"odd\\\"\" UNLESS age <= 3 AND marital-status.len = 2 THEN class = \"deny\"";
        let frs = parse_rule_set(text, &s).unwrap();
        assert_eq!(frs.rules[0].exclusions.len(), 1);
        assert_eq!(render_rule(&frs.rules[0], &s), text);
    }

    fn arb_rule_text() -> impl Strategy<Value = String> {
        let pred = prop_oneof![
            (0usize..2, prop::sample::select(vec!["=", "<", "<=", ">", ">="]), -1e6f64..1e6)
                .prop_map(|(a, op, v)| {
                    let name = ["age", "`two words`"][a];
                    format!("{name} {op} {v}")
                }),
            (prop::sample::select(vec!["=", "!="]), 0usize..2).prop_map(|(op, c)| {
                format!("status {op} \"{}\"", ["single", "married"][c])
            }),
        ];
        let clause = prop::collection::vec(pred, 1..4).prop_map(|ps| ps.join(" AND "));
        (clause.clone(), prop::option::of(clause), 0u32..=10).prop_map(|(c, ex, p)| {
            let head = match ex {
                Some(e) => format!("IF {c} UNLESS {e}"),
                None => format!("IF {c}"),
            };
            let p = f64::from(p) / 10.0;
            if p == 1.0 {
                format!("{head} THEN class = \"approve\"")
            } else {
                format!("{head} THEN class ~ {{\"approve\": {p}, \"deny\": {}}}", 1.0 - p)
            }
        })
    }

    proptest! {
        #[test]
        fn parse_render_round_trip(texts in prop::collection::vec(arb_rule_text(), 1..5)) {
            let s = schema();
            let text = texts.join("\n");
            let Ok(frs) = parse_rule_set(&text, &s) else {
                // 1 - p may not sum back to exactly 1 within tolerance; skip those.
                return Ok(());
            };
            let rendered = render_rule_set(&frs, &s);
            let again = parse_rule_set(&rendered, &s).unwrap();
            prop_assert_eq!(&again, &frs);
            prop_assert_eq!(render_rule_set(&again, &s), rendered);
        }
    }
}
