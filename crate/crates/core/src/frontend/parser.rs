//! Recursive-descent parser for the supported subset:
//!
//! ```text
//! Query     := 'count' '(' Expr ')' | Expr
//! Expr      := Flwor | Path
//! Flwor     := (ForClause | LetClause)+ ['where' Cond] 'return' Return
//! ForClause := 'for' Var 'in' Path (',' Var 'in' Path)*
//! LetClause := 'let' Var ':=' Path (',' Var ':=' Path)*
//! Return    := Var | '(' Var (',' Var)* ')'
//! Cond      := Atom ('and' Atom)*
//! Atom      := '(' Cond ')' | Path [CmpOp Literal] | Literal CmpOp Path
//! Path      := ('/' | '//') Steps | Var [('/' | '//') Steps] | '.' [('/' | '//') Steps] | Steps
//! Steps     := Step (('/' | '//') Step)*
//! Step      := ('@' Name | Name | '*') ('[' Cond ']')*
//! ```

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::QueryError;
use crate::query::{Axis, Literal, NameTest};

pub fn parse_query(text: &str) -> Result<QueryAst, QueryError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        bound: HashSet::new(),
    };
    let ast = p.query()?;
    p.expect_eof()?;
    Ok(ast)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    bound: HashSet<String>,
}

fn unsupported(what: impl Into<String>) -> QueryError {
    QueryError::UnsupportedConstruct(what.into())
}

const ARITHMETIC_WORDS: [&str; 4] = ["div", "mod", "idiv", "to"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn position(&self) -> usize {
        self.tokens[self.pos].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == w)
    }

    fn error(&self, message: impl Into<String>) -> QueryError {
        QueryError::SyntaxError {
            position: self.position(),
            message: message.into(),
        }
    }

    fn expected(&self, what: &str) -> QueryError {
        self.error(format!("expected {what}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), QueryError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(what))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), QueryError> {
        if self.is_word(w) {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(&format!("`{w}`")))
        }
    }

    fn expect_eof(&self) -> Result<(), QueryError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            Tok::Pipe => Err(unsupported("union `|`")),
            _ => Err(self.expected("end of query")),
        }
    }

    /// A name directly followed by `(` is a function call.
    fn check_function_call(&self) -> Result<(), QueryError> {
        if let (Tok::Name(n), Tok::LParen) = (self.peek(), self.peek_at(1)) {
            return Err(unsupported(format!("function `{n}()` (only an outer count() is supported)")));
        }
        Ok(())
    }

    fn query(&mut self) -> Result<QueryAst, QueryError> {
        if self.is_word("count") && *self.peek_at(1) == Tok::LParen {
            self.bump();
            self.bump();
            let body = self.expr()?;
            self.expect(Tok::RParen, "`)` closing count(")?;
            return Ok(QueryAst {
                count_wrapped: true,
                body,
            });
        }
        let body = self.expr()?;
        Ok(QueryAst {
            count_wrapped: false,
            body,
        })
    }

    fn expr(&mut self) -> Result<Body, QueryError> {
        if (self.is_word("for") || self.is_word("let")) && matches!(self.peek_at(1), Tok::Var(_)) {
            return Ok(Body::Flwor(self.flwor()?));
        }
        if self.is_word("some") || self.is_word("every") {
            return Err(unsupported("quantified expression"));
        }
        self.check_function_call()?;
        let start = self.position();
        let path = self.path()?;
        if path.base != PathBase::Document {
            return Err(QueryError::SyntaxError {
                position: start,
                message: "a standalone path must start with `/` or `//`".into(),
            });
        }
        self.reject_trailing_operator()?;
        Ok(Body::Path(path))
    }

    fn flwor(&mut self) -> Result<Flwor, QueryError> {
        let mut bindings = Vec::new();
        loop {
            let kind = if self.is_word("for") {
                BindingKind::For
            } else if self.is_word("let") {
                BindingKind::Let
            } else {
                break;
            };
            self.bump();
            loop {
                let var_pos = self.position();
                let Tok::Var(var) = self.bump() else {
                    return Err(QueryError::SyntaxError {
                        position: var_pos,
                        message: "expected a variable".into(),
                    });
                };
                match kind {
                    BindingKind::For => {
                        if self.is_word("at") {
                            return Err(unsupported("positional variable `at`"));
                        }
                        self.expect_word("in")?
                    }
                    BindingKind::Let => self.expect(Tok::Assign, "`:=`")?,
                }
                let path = self.operand_path(false)?;
                if !self.bound.insert(var.clone()) {
                    return Err(unsupported(format!("rebinding variable ${var}")));
                }
                bindings.push(Binding { kind, var, path });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        let mut conditions = Vec::new();
        if self.is_word("where") {
            self.bump();
            conditions = self.conjunction(false)?;
        }
        if self.is_word("order") || self.is_word("group") || self.is_word("stable") {
            return Err(unsupported("order by / group by"));
        }
        self.expect_word("return")?;
        let mut returns = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            loop {
                returns.push(self.return_var()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::RParen, "`)` closing the return tuple")?;
        } else {
            returns.push(self.return_var()?);
        }
        Ok(Flwor {
            bindings,
            conditions,
            returns,
        })
    }

    fn return_var(&mut self) -> Result<String, QueryError> {
        let pos = self.position();
        match self.bump() {
            Tok::Var(v) => {
                if !self.bound.contains(&v) {
                    return Err(QueryError::SyntaxError {
                        position: pos,
                        message: format!("undefined variable ${v}"),
                    });
                }
                if matches!(self.peek(), Tok::Slash | Tok::DoubleSlash | Tok::LBracket) {
                    return Err(unsupported("paths in the return clause (return variables only)"));
                }
                Ok(v)
            }
            Tok::Name(_) | Tok::Slash | Tok::DoubleSlash | Tok::Dot => {
                Err(unsupported("expressions other than variables in the return clause"))
            }
            t => Err(QueryError::SyntaxError {
                position: pos,
                message: format!("expected a variable, found {}", t.describe()),
            }),
        }
    }

    fn reject_trailing_operator(&self) -> Result<(), QueryError> {
        match self.peek() {
            Tok::Plus | Tok::Minus | Tok::Star => Err(unsupported("arithmetic")),
            Tok::Name(n) if ARITHMETIC_WORDS.contains(&n.as_str()) => Err(unsupported("arithmetic")),
            Tok::Name(n) if n == "or" => Err(unsupported("`or` (only `and` conjunctions)")),
            Tok::Pipe => Err(unsupported("union `|`")),
            _ => Ok(()),
        }
    }

    /// `in_step`: inside a step predicate, where relative paths and `.` refer to the step.
    fn conjunction(&mut self, in_step: bool) -> Result<Vec<Condition>, QueryError> {
        let mut out = Vec::new();
        loop {
            self.atom(in_step, &mut out)?;
            if self.is_word("and") {
                self.bump();
            } else if self.is_word("or") {
                return Err(unsupported("`or` (only `and` conjunctions)"));
            } else {
                return Ok(out);
            }
        }
    }

    fn literal(&mut self) -> Result<Option<Literal>, QueryError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(Some(Literal::String(s)))
            }
            Tok::Number(n) => {
                self.bump();
                Ok(Literal::number(&n))
            }
            Tok::Minus if matches!(self.peek_at(1), Tok::Number(_)) => {
                self.bump();
                let Tok::Number(n) = self.bump() else { unreachable!() };
                Ok(Literal::number(&format!("-{n}")))
            }
            _ => Ok(None),
        }
    }

    fn atom(&mut self, in_step: bool, out: &mut Vec<Condition>) -> Result<(), QueryError> {
        if *self.peek() == Tok::LParen {
            self.bump();
            out.extend(self.conjunction(in_step)?);
            return self.expect(Tok::RParen, "`)`");
        }
        if self.is_word("not") || self.is_word("some") || self.is_word("every") {
            if *self.peek_at(1) == Tok::LParen {
                return Err(unsupported("function `not()` (only an outer count() is supported)"));
            }
            if matches!(self.peek_at(1), Tok::Var(_)) {
                return Err(unsupported("quantified expression"));
            }
        }
        self.check_function_call()?;
        if let Some(literal) = self.literal()? {
            let Tok::Cmp(op) = *self.peek() else {
                return Err(match (in_step, self.peek()) {
                    (true, Tok::RBracket) => unsupported("positional predicate"),
                    (_, Tok::Plus | Tok::Minus | Tok::Star) => unsupported("arithmetic"),
                    _ => self.expected("a comparison operator"),
                });
            };
            self.bump();
            if self.literal()?.is_some() {
                return Err(unsupported("comparison between two literals"));
            }
            let path = self.operand_path(in_step)?;
            out.push(Condition::Compare {
                path,
                op: op.flipped(),
                literal,
            });
            return Ok(());
        }
        let path = self.operand_path(in_step)?;
        if let Tok::Cmp(op) = *self.peek() {
            self.bump();
            match self.literal()? {
                Some(literal) => {
                    self.reject_trailing_operator()?;
                    out.push(Condition::Compare { path, op, literal });
                }
                None => {
                    return Err(match self.peek() {
                        Tok::Var(_) | Tok::Name(_) | Tok::Slash | Tok::DoubleSlash | Tok::Dot | Tok::At => {
                            unsupported("comparison between two paths or variables (only path op literal)")
                        }
                        _ => self.expected("a literal"),
                    });
                }
            }
        } else {
            out.push(Condition::Exists(path));
        }
        Ok(())
    }

    fn operand_path(&mut self, in_step: bool) -> Result<PathExpr, QueryError> {
        self.check_function_call()?;
        let start = self.position();
        let path = self.path()?;
        if path.base == PathBase::Context && !in_step {
            return Err(QueryError::SyntaxError {
                position: start,
                message: "relative path outside a step predicate has no context".into(),
            });
        }
        self.reject_trailing_operator()?;
        Ok(path)
    }

    fn path(&mut self) -> Result<PathExpr, QueryError> {
        let pos = self.position();
        let (base, first_axis) = match self.peek().clone() {
            Tok::Slash => {
                self.bump();
                if !self.at_step_start() {
                    return Err(unsupported("the document node `/` as a value"));
                }
                (PathBase::Document, Some(Axis::Pc))
            }
            Tok::DoubleSlash => {
                self.bump();
                (PathBase::Document, Some(Axis::Ad))
            }
            Tok::Var(v) => {
                self.bump();
                if !self.bound.contains(&v) {
                    return Err(QueryError::SyntaxError {
                        position: pos,
                        message: format!("undefined variable ${v}"),
                    });
                }
                (PathBase::Var(v), None)
            }
            Tok::Dot => {
                self.bump();
                (PathBase::Context, None)
            }
            Tok::DotDot => return Err(unsupported("parent axis `..`")),
            _ if self.at_step_start() => (PathBase::Context, Some(Axis::Pc)),
            _ => return Err(self.expected("a path")),
        };
        let mut steps = Vec::new();
        if let Some(axis) = first_axis {
            steps.push(self.step(axis)?);
        }
        loop {
            let axis = match self.peek() {
                Tok::Slash => Axis::Pc,
                Tok::DoubleSlash => Axis::Ad,
                Tok::LBracket if steps.is_empty() => {
                    return Err(unsupported("predicates on a variable or `.` (use a where clause)"))
                }
                _ => break,
            };
            self.bump();
            steps.push(self.step(axis)?);
        }
        Ok(PathExpr { base, steps })
    }

    fn at_step_start(&self) -> bool {
        matches!(self.peek(), Tok::Name(_) | Tok::At | Tok::Star | Tok::Dot | Tok::DotDot)
    }

    fn step(&mut self, axis: Axis) -> Result<Step, QueryError> {
        let test = match self.peek().clone() {
            Tok::At => {
                self.bump();
                match self.bump() {
                    Tok::Name(n) => NameTest::Name(format!("@{n}")),
                    Tok::Star => return Err(unsupported("attribute wildcard `@*`")),
                    _ => {
                        self.pos -= 1;
                        return Err(self.expected("an attribute name"));
                    }
                }
            }
            Tok::Name(n) => {
                self.check_function_call()?;
                if *self.peek_at(1) == Tok::ColonColon {
                    return Err(unsupported(format!("explicit axis `{n}::`")));
                }
                self.bump();
                NameTest::Name(n)
            }
            Tok::Star => {
                self.bump();
                NameTest::Wildcard
            }
            Tok::Dot => return Err(unsupported("self step `.` inside a path")),
            Tok::DotDot => return Err(unsupported("parent axis `..`")),
            _ => return Err(self.expected("a step")),
        };
        let mut predicates = Vec::new();
        while *self.peek() == Tok::LBracket {
            self.bump();
            predicates.extend(self.conjunction(true)?);
            self.expect(Tok::RBracket, "`]`")?;
        }
        Ok(Step { axis, test, predicates })
    }
}
