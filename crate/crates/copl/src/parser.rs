//! Recursive descent parser producing a [`ProgramAst`].
//!
//! Parsing stops at the first error. Member-level invariants that are
//! purely local (unique member names, the shape of `continue`) are
//! enforced here; declaration-level validation lives in the semantic
//! passes.

use crate::ast::*;
use crate::diag::Diagnostic;
use crate::lexer::{Token, TokenKind};

pub struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

pub fn parse(tokens: Vec<Token>) -> PResult<ProgramAst> {
    Parser::new(tokens).program()
}

impl Parser {
    pub fn new(tokens: Vec<Token>) -> Self {
        assert!(
            tokens.last().is_some_and(|t| t.kind == TokenKind::Eof),
            "token stream must end with end-of-input"
        );
        Parser { tokens, pos: 0 }
    }

    fn current(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_next(&self) -> &Token {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)]
    }

    fn at_eof(&self) -> bool {
        self.current().kind == TokenKind::Eof
    }

    fn advance(&mut self) -> Token {
        let tok = self.current().clone();
        if !self.at_eof() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &str) -> Diagnostic {
        let tok = self.current();
        Diagnostic::new(
            tok.span,
            format!("expected {}, found {}", expected, tok.describe()),
        )
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.current().is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        if self.current().is_punct(p) {
            Ok(self.advance())
        } else {
            Err(self.error(&format!("`{}`", p)))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Token> {
        if self.current().is_keyword(kw) {
            Ok(self.advance())
        } else {
            Err(self.error(&format!("`{}`", kw)))
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<Ident> {
        if self.current().kind == TokenKind::Identifier {
            let tok = self.advance();
            Ok(Ident::new(tok.lexeme, tok.span))
        } else {
            Err(self.error(what))
        }
    }

    // ── Declarations ──

    fn program(&mut self) -> PResult<ProgramAst> {
        let mut decls = Vec::new();
        while !self.at_eof() {
            decls.push(self.declaration()?);
        }
        Ok(ProgramAst { decls })
    }

    fn declaration(&mut self) -> PResult<Decl> {
        let tok = self.current();
        if tok.is_keyword("concept") {
            self.concept_decl().map(Decl::Concept)
        } else if tok.is_keyword("class") {
            self.class_decl().map(Decl::Class)
        } else {
            Err(self.error("a `concept` or `class` declaration"))
        }
    }

    fn parent_clause(&mut self) -> PResult<Option<Ident>> {
        if self.current().is_keyword("in") {
            self.advance();
            Ok(Some(self.expect_ident("identifier after 'in'")?))
        } else {
            Ok(None)
        }
    }

    fn concept_decl(&mut self) -> PResult<ConceptDecl> {
        let kw = self.expect_keyword("concept")?;
        let name = self.expect_ident("concept name")?;
        let parent = self.parent_clause()?;

        // A concept body is a run of `class { … }` / `reference { … }`
        // sections with no enclosing braces; the next top-level keyword
        // ends it. `class` starts a section only when followed by `{`.
        let mut object_class: Option<ClassBody> = None;
        let mut reference_class: Option<ClassBody> = None;
        loop {
            let tok = self.current();
            if tok.is_keyword("class") && self.peek_next().is_punct("{") {
                let span = tok.span;
                self.advance();
                let body = self.class_body()?;
                if object_class.replace(body).is_some() {
                    return Err(Diagnostic::new(
                        span,
                        format!("duplicate `class` section in concept `{}`", name.text),
                    ));
                }
            } else if tok.is_keyword("reference") {
                let span = tok.span;
                self.advance();
                let body = self.class_body()?;
                if reference_class.replace(body).is_some() {
                    return Err(Diagnostic::new(
                        span,
                        format!("duplicate `reference` section in concept `{}`", name.text),
                    ));
                }
            } else {
                break;
            }
        }

        Ok(ConceptDecl {
            span: kw.span,
            name,
            parent,
            object_class: object_class.unwrap_or_default(),
            reference_class: reference_class.unwrap_or_default(),
        })
    }

    fn class_decl(&mut self) -> PResult<ClassDecl> {
        let kw = self.expect_keyword("class")?;
        let name = self.expect_ident("class name")?;
        let parent = self.parent_clause()?;
        let body = self.class_body()?;
        Ok(ClassDecl {
            span: kw.span,
            name,
            parent,
            body,
        })
    }

    fn class_body(&mut self) -> PResult<ClassBody> {
        self.expect_punct("{")?;
        let mut body = ClassBody::default();
        while !self.current().is_punct("}") {
            if self.at_eof() {
                return Err(self.error("`}` closing the class body"));
            }
            self.member(&mut body)?;
        }
        self.expect_punct("}")?;
        Ok(body)
    }

    /// Parses one member: `static? Type name` followed by `;`, `= expr ;`,
    /// `.create() ;`, or a parameter list and method body.
    fn member(&mut self, body: &mut ClassBody) -> PResult<()> {
        let is_static = if self.current().is_keyword("static") {
            self.advance();
            true
        } else {
            false
        };
        let ty = self.expect_ident("a type name")?;
        let name = self.expect_ident("a member name")?;

        if body.find_field(&name.text).is_some() || body.find_method(&name.text).is_some() {
            return Err(Diagnostic::new(
                name.span,
                format!("duplicate member `{}`", name.text),
            ));
        }

        let tok = self.current().clone();
        if tok.is_punct(";") {
            self.advance();
            body.fields.push(FieldDecl {
                is_static,
                ty,
                name,
                init: FieldInit::None,
            });
        } else if tok.is_punct("=") {
            self.advance();
            let init = self.expression()?;
            self.expect_punct(";")?;
            body.fields.push(FieldDecl {
                is_static,
                ty,
                name,
                init: FieldInit::Expr(init),
            });
        } else if tok.is_punct(".") {
            self.advance();
            let call = self.expect_ident("`create`")?;
            if call.text != "create" {
                return Err(Diagnostic::new(
                    call.span,
                    format!("expected `create`, found `{}`", call.text),
                ));
            }
            self.expect_punct("(")?;
            self.expect_punct(")")?;
            self.expect_punct(";")?;
            body.fields.push(FieldDecl {
                is_static,
                ty,
                name,
                init: FieldInit::Create,
            });
        } else if tok.is_punct("(") {
            if is_static {
                return Err(Diagnostic::new(
                    name.span,
                    "methods cannot be declared static",
                ));
            }
            let params = self.param_list()?;
            if name.text == "continue" {
                if !params.is_empty() {
                    return Err(Diagnostic::new(
                        name.span,
                        "`continue` takes no parameters",
                    ));
                }
                if ty.text != "void" {
                    return Err(Diagnostic::new(name.span, "`continue` must return void"));
                }
            }
            let method_body = self.block()?;
            body.methods.push(MethodDecl {
                return_ty: ty,
                name,
                params,
                body: method_body,
            });
        } else {
            return Err(self.error("`;`, `=`, `.create()`, or a parameter list"));
        }
        Ok(())
    }

    fn param_list(&mut self) -> PResult<Vec<Param>> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.current().is_punct(")") {
            loop {
                let ty = self.expect_ident("a parameter type")?;
                let name = self.expect_ident("a parameter name")?;
                params.push(Param { ty, name });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(params)
    }

    // ── Statements ──

    fn block(&mut self) -> PResult<Block> {
        let open = self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.current().is_punct("}") {
            if self.at_eof() {
                return Err(self.error("`}` closing the block"));
            }
            stmts.push(self.statement()?);
        }
        self.expect_punct("}")?;
        Ok(Block {
            stmts,
            span: open.span,
        })
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let tok = self.current().clone();
        if tok.is_punct("{") {
            return Ok(Stmt::Block(self.block()?));
        }
        if tok.is_keyword("if") {
            self.advance();
            self.expect_punct("(")?;
            let cond = self.expression()?;
            self.expect_punct(")")?;
            let then_branch = Box::new(self.statement()?);
            let else_branch = if self.current().is_keyword("else") {
                self.advance();
                Some(Box::new(self.statement()?))
            } else {
                None
            };
            return Ok(Stmt::If {
                cond,
                then_branch,
                else_branch,
                span: tok.span,
            });
        }
        if tok.is_keyword("return") {
            self.advance();
            let value = if self.current().is_punct(";") {
                None
            } else {
                Some(self.expression()?)
            };
            self.expect_punct(";")?;
            return Ok(Stmt::Return {
                value,
                span: tok.span,
            });
        }
        // Two identifiers in a row start a variable declaration.
        if tok.kind == TokenKind::Identifier && self.peek_next().kind == TokenKind::Identifier {
            let ty = self.expect_ident("a type name")?;
            let name = self.expect_ident("a variable name")?;
            let init = if self.eat_punct("=") {
                Some(self.expression()?)
            } else {
                None
            };
            self.expect_punct(";")?;
            return Ok(Stmt::VarDecl {
                span: ty.span,
                ty,
                name,
                init,
            });
        }
        let expr = self.expression()?;
        self.expect_punct(";")?;
        Ok(Stmt::Expr(expr))
    }

    // ── Expressions ──

    fn expression(&mut self) -> PResult<Expr> {
        self.assignment()
    }

    fn assignment(&mut self) -> PResult<Expr> {
        let expr = self.equality()?;
        let tok = self.current().clone();
        if tok.is_punct("=") || tok.is_punct("+=") {
            if !matches!(expr, Expr::Ident(_) | Expr::Field { .. }) {
                return Err(Diagnostic::new(tok.span, "invalid assignment target"));
            }
            self.advance();
            let value = Box::new(self.assignment()?);
            let target = Box::new(expr);
            return Ok(if tok.is_punct("=") {
                Expr::Assign {
                    target,
                    value,
                    span: tok.span,
                }
            } else {
                Expr::AddAssign {
                    target,
                    value,
                    span: tok.span,
                }
            });
        }
        Ok(expr)
    }

    fn equality(&mut self) -> PResult<Expr> {
        let mut expr = self.relational()?;
        loop {
            let tok = self.current().clone();
            let op = if tok.is_punct("==") {
                BinOp::Eq
            } else if tok.is_punct("!=") {
                BinOp::Ne
            } else {
                break;
            };
            self.advance();
            let rhs = self.relational()?;
            expr = Expr::Binary {
                op,
                lhs: Box::new(expr),
                rhs: Box::new(rhs),
                span: tok.span,
            };
        }
        Ok(expr)
    }

    fn relational(&mut self) -> PResult<Expr> {
        let mut expr = self.additive()?;
        loop {
            let tok = self.current().clone();
            let op = if tok.is_punct("<") {
                BinOp::Lt
            } else if tok.is_punct(">") {
                BinOp::Gt
            } else {
                break;
            };
            self.advance();
            let rhs = self.additive()?;
            expr = Expr::Binary {
                op,
                lhs: Box::new(expr),
                rhs: Box::new(rhs),
                span: tok.span,
            };
        }
        Ok(expr)
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut expr = self.unary()?;
        loop {
            let tok = self.current().clone();
            let op = if tok.is_punct("+") {
                BinOp::Add
            } else if tok.is_punct("-") {
                BinOp::Sub
            } else {
                break;
            };
            self.advance();
            let rhs = self.unary()?;
            expr = Expr::Binary {
                op,
                lhs: Box::new(expr),
                rhs: Box::new(rhs),
                span: tok.span,
            };
        }
        Ok(expr)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let tok = self.current().clone();
        if tok.is_punct("-") {
            self.advance();
            let operand = Box::new(self.unary()?);
            return Ok(Expr::Neg {
                operand,
                span: tok.span,
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut expr = self.primary()?;
        loop {
            let tok = self.current().clone();
            if tok.is_punct(".") {
                self.advance();
                let name = self.expect_ident("a member name after `.`")?;
                if self.current().is_punct("(") {
                    let args = self.arg_list()?;
                    expr = Expr::MethodCall {
                        recv: Box::new(expr),
                        method: name,
                        args,
                    };
                } else {
                    expr = Expr::Field {
                        base: Box::new(expr),
                        name,
                    };
                }
            } else if tok.is_punct("@") {
                let Expr::Ident(ty) = expr else {
                    return Err(Diagnostic::new(
                        tok.span,
                        "`@` reference constructor requires a type name on its left",
                    ));
                };
                self.advance();
                let args = self.arg_list()?;
                expr = Expr::RefCtor {
                    ty,
                    args,
                    span: tok.span,
                };
            } else if tok.is_punct("++") || tok.is_punct("--") {
                if !matches!(expr, Expr::Ident(_) | Expr::Field { .. }) {
                    return Err(Diagnostic::new(
                        tok.span,
                        format!("invalid `{}` target", tok.lexeme),
                    ));
                }
                self.advance();
                expr = Expr::IncDec {
                    target: Box::new(expr),
                    increment: tok.is_punct("++"),
                    span: tok.span,
                };
            } else {
                break;
            }
        }
        Ok(expr)
    }

    fn arg_list(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.current().is_punct(")") {
            loop {
                args.push(self.expression()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let tok = self.current().clone();
        match tok.kind {
            TokenKind::IntLiteral => {
                self.advance();
                let value: i64 = tok
                    .lexeme
                    .parse()
                    .map_err(|_| Diagnostic::new(tok.span, "integer literal too large"))?;
                Ok(Expr::IntLit {
                    value,
                    span: tok.span,
                })
            }
            TokenKind::FloatLiteral => {
                self.advance();
                let value: f64 = tok
                    .lexeme
                    .parse()
                    .map_err(|_| Diagnostic::new(tok.span, "malformed floating-point literal"))?;
                Ok(Expr::FloatLit {
                    value,
                    span: tok.span,
                })
            }
            TokenKind::StrLiteral => {
                self.advance();
                Ok(Expr::StrLit {
                    value: tok.lexeme,
                    span: tok.span,
                })
            }
            TokenKind::Identifier => {
                self.advance();
                let name = Ident::new(tok.lexeme, tok.span);
                if self.current().is_punct("(") {
                    let args = self.arg_list()?;
                    Ok(Expr::BareCall { name, args })
                } else {
                    Ok(Expr::Ident(name))
                }
            }
            TokenKind::Keyword if tok.lexeme == "context" => {
                self.advance();
                Ok(Expr::Context { span: tok.span })
            }
            TokenKind::Keyword if tok.lexeme == "new" => {
                self.advance();
                let ty = self.expect_ident("a type name after `new`")?;
                let args = self.arg_list()?;
                Ok(Expr::New {
                    ty,
                    args,
                    span: tok.span,
                })
            }
            TokenKind::Punct if tok.lexeme == "(" => {
                self.advance();
                let inner = self.expression()?;
                self.expect_punct(")")?;
                Ok(inner)
            }
            _ => Err(self.error("an expression")),
        }
    }
}
