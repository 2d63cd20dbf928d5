//! Parser and printer for the OpenQASM 2.0 subset used by circuit datasets.
//!
//! Accepted grammar: the `OPENQASM 2.0;` header, an optional
//! `include "qelib1.inc";`, exactly one `qreg`, and gate statements over
//! {h, x, y, z, s, sdg, t, tdg, rx, ry, rz, u, u3, cx, cz}. Angle
//! expressions support decimal literals, `pi`, unary minus, `*` and `/`.
//! `//` comments are stripped; whitespace is insignificant. Classical
//! constructs (creg, measure, barrier, reset, if, gate definitions) are
//! rejected: these circuits prepare states for expectation-value models.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::simulator::{self, Mat2, StateVector};

/// Largest register a program may simulate (2^26 amplitudes ≈ 1 GiB).
pub const MAX_SIM_QUBITS: usize = 26;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QasmErrorKind {
    ExpectedToken(String),
    UnsupportedGate(String),
    UnsupportedStatement(String),
    OperandOutOfRange { index: usize, size: usize },
    UnknownRegister(String),
    MultipleQreg,
    MissingQreg,
    DuplicateOperand(usize),
    WrongOperandCount { gate: String, expected: usize, actual: usize },
    WrongParamCount { gate: String, expected: usize, actual: usize },
    BadNumber(String),
    NonFiniteAngle,
    UnexpectedEnd,
    UnexpectedChar(char),
    TooManyQubits { n_qubits: usize, max: usize },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("line {line}, column {col}: {}", describe(kind))]
pub struct QasmError {
    pub line: usize,
    pub col: usize,
    pub kind: QasmErrorKind,
}

fn describe(kind: &QasmErrorKind) -> String {
    use QasmErrorKind::*;
    match kind {
        ExpectedToken(t) => format!("expected {t}"),
        UnsupportedGate(g) => format!("unsupported gate `{g}`"),
        UnsupportedStatement(s) => format!("unsupported statement `{s}`"),
        OperandOutOfRange { index, size } => {
            format!("operand index {index} out of range for register of size {size}")
        }
        UnknownRegister(r) => format!("unknown register `{r}`"),
        MultipleQreg => "only one qreg is supported".to_string(),
        MissingQreg => "statement before qreg declaration".to_string(),
        DuplicateOperand(q) => format!("qubit {q} used twice in one statement"),
        WrongOperandCount { gate, expected, actual } => {
            format!("gate `{gate}` takes {expected} qubit(s), got {actual}")
        }
        WrongParamCount { gate, expected, actual } => {
            format!("gate `{gate}` takes {expected} parameter(s), got {actual}")
        }
        BadNumber(s) => format!("malformed number `{s}`"),
        NonFiniteAngle => "angle expression is not finite".to_string(),
        UnexpectedEnd => "unexpected end of input".to_string(),
        UnexpectedChar(c) => format!("unexpected character `{c}`"),
        TooManyQubits { n_qubits, max } => {
            format!("register of {n_qubits} qubits exceeds the simulation cap of {max}")
        }
    }
}

pub type Result<T> = std::result::Result<T, QasmError>;

/// Gate vocabulary of the subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Rx,
    Ry,
    Rz,
    U3,
    Cx,
    Cz,
}

impl GateKind {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "h" => Some(Self::H),
            "x" => Some(Self::X),
            "y" => Some(Self::Y),
            "z" => Some(Self::Z),
            "s" => Some(Self::S),
            "sdg" => Some(Self::Sdg),
            "t" => Some(Self::T),
            "tdg" => Some(Self::Tdg),
            "rx" => Some(Self::Rx),
            "ry" => Some(Self::Ry),
            "rz" => Some(Self::Rz),
            "u" | "u3" => Some(Self::U3),
            "cx" => Some(Self::Cx),
            "cz" => Some(Self::Cz),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::H => "h",
            Self::X => "x",
            Self::Y => "y",
            Self::Z => "z",
            Self::S => "s",
            Self::Sdg => "sdg",
            Self::T => "t",
            Self::Tdg => "tdg",
            Self::Rx => "rx",
            Self::Ry => "ry",
            Self::Rz => "rz",
            Self::U3 => "u3",
            Self::Cx => "cx",
            Self::Cz => "cz",
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            Self::Cx | Self::Cz => 2,
            _ => 1,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Self::Rx | Self::Ry | Self::Rz => 1,
            Self::U3 => 3,
            _ => 0,
        }
    }
}

/// One gate application with resolved operands and evaluated angles.
#[derive(Debug, Clone, PartialEq)]
pub struct QasmStatement {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub params: Vec<f64>,
}

/// A parsed program: one register plus an ordered statement list.
#[derive(Debug, Clone, PartialEq)]
pub struct QasmProgram {
    pub register: String,
    pub n_qubits: usize,
    pub statements: Vec<QasmStatement>,
}

impl fmt::Display for QasmProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "OPENQASM 2.0;")?;
        writeln!(f, "include \"qelib1.inc\";")?;
        writeln!(f, "qreg {}[{}];", self.register, self.n_qubits)?;
        for s in &self.statements {
            write!(f, "{}", s.kind.name())?;
            if !s.params.is_empty() {
                write!(f, "(")?;
                for (i, p) in s.params.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")?;
            }
            write!(f, " ")?;
            for (i, q) in s.qubits.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}[{}]", self.register, q)?;
            }
            writeln!(f, ";")?;
        }
        Ok(())
    }
}

/// Parses a source string into a program; every failure carries a position.
pub fn parse_qasm(source: &str) -> Result<QasmProgram> {
    Parser::new(source).parse()
}

/// Runs the program on `|0…0⟩`, returning the quantum feature state.
/// Single-qubit gates are applied directly as amplitude updates.
pub fn to_feature_state(program: &QasmProgram) -> Result<StateVector> {
    if program.n_qubits > MAX_SIM_QUBITS {
        return Err(QasmError {
            line: 0,
            col: 0,
            kind: QasmErrorKind::TooManyQubits { n_qubits: program.n_qubits, max: MAX_SIM_QUBITS },
        });
    }
    let mut state = StateVector::zero(program.n_qubits);
    for s in &program.statements {
        state = apply_statement(&state, s);
    }
    Ok(state)
}

/// Applies one statement to a state. Operands are assumed validated.
pub fn apply_statement(state: &StateVector, s: &QasmStatement) -> StateVector {
    match s.kind {
        GateKind::Cx => {
            let gate = simulator::TwoQubitGate::cnot(s.qubits[0], s.qubits[1])
                .expect("validated operands");
            simulator::apply_gate(state, &gate).expect("validated operands")
        }
        GateKind::Cz => {
            let z = Complex64::new(0.0, 0.0);
            let o = Complex64::new(1.0, 0.0);
            let m = [
                [o, z, z, z],
                [z, o, z, z],
                [z, z, o, z],
                [z, z, z, Complex64::new(-1.0, 0.0)],
            ];
            let gate = simulator::TwoQubitGate::new((s.qubits[0], s.qubits[1]), m)
                .expect("cz is unitary");
            simulator::apply_gate(state, &gate).expect("validated operands")
        }
        _ => {
            let m = single_qubit_matrix(s.kind, &s.params);
            simulator::apply_single(state, s.qubits[0], m).expect("validated operands")
        }
    }
}

/// The 2×2 matrix of a single-qubit gate in the subset.
pub fn single_qubit_matrix(kind: GateKind, params: &[f64]) -> Mat2 {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let f = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        GateKind::H => [[Complex64::new(f, 0.0), Complex64::new(f, 0.0)], [
            Complex64::new(f, 0.0),
            Complex64::new(-f, 0.0),
        ]],
        GateKind::X => simulator::pauli::X,
        GateKind::Y => simulator::pauli::Y,
        GateKind::Z => simulator::pauli::Z,
        GateKind::S => [[o, z], [z, Complex64::new(0.0, 1.0)]],
        GateKind::Sdg => [[o, z], [z, Complex64::new(0.0, -1.0)]],
        GateKind::T => [[o, z], [z, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]],
        GateKind::Tdg => [[o, z], [z, Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4)]],
        GateKind::Rx => {
            let (c, s) = ((params[0] / 2.0).cos(), (params[0] / 2.0).sin());
            [[Complex64::new(c, 0.0), Complex64::new(0.0, -s)], [
                Complex64::new(0.0, -s),
                Complex64::new(c, 0.0),
            ]]
        }
        GateKind::Ry => {
            let (c, s) = ((params[0] / 2.0).cos(), (params[0] / 2.0).sin());
            [[Complex64::new(c, 0.0), Complex64::new(-s, 0.0)], [
                Complex64::new(s, 0.0),
                Complex64::new(c, 0.0),
            ]]
        }
        GateKind::Rz => [
            [Complex64::from_polar(1.0, -params[0] / 2.0), z],
            [z, Complex64::from_polar(1.0, params[0] / 2.0)],
        ],
        GateKind::U3 => {
            let (theta, phi, lam) = (params[0], params[1], params[2]);
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            [
                [Complex64::new(c, 0.0), -Complex64::from_polar(s, lam)],
                [Complex64::from_polar(s, phi), Complex64::from_polar(c, phi + lam)],
            ]
        }
        GateKind::Cx | GateKind::Cz => unreachable!("two-qubit kinds handled separately"),
    }
}

// --- lexer / parser --------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    StringLit(String),
    Symbol(char),
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    line: usize,
    col: usize,
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    end_line: usize,
    end_col: usize,
    lex_error: Option<QasmError>,
}

impl Parser {
    fn new(source: &str) -> Self {
        let mut tokens = Vec::new();
        let mut lex_error = None;
        let mut line = 1usize;
        let mut col = 1usize;
        let mut chars = source.chars().peekable();

        'outer: while let Some(&c) = chars.peek() {
            let (tline, tcol) = (line, col);
            let bump = |ch: char, line: &mut usize, col: &mut usize| {
                if ch == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
            };
            if c.is_whitespace() {
                chars.next();
                bump(c, &mut line, &mut col);
                continue;
            }
            if c == '/' {
                chars.next();
                bump(c, &mut line, &mut col);
                if chars.peek() == Some(&'/') {
                    for ch in chars.by_ref() {
                        bump(ch, &mut line, &mut col);
                        if ch == '\n' {
                            continue 'outer;
                        }
                    }
                    break;
                }
                tokens.push(Spanned { token: Token::Symbol('/'), line: tline, col: tcol });
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let mut name = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_ascii_alphanumeric() || ch == '_' || ch == '.' {
                        name.push(ch);
                        chars.next();
                        bump(ch, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                tokens.push(Spanned { token: Token::Ident(name), line: tline, col: tcol });
                continue;
            }
            if c.is_ascii_digit() || c == '.' {
                let mut text = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_ascii_digit() || ch == '.' {
                        text.push(ch);
                        chars.next();
                        bump(ch, &mut line, &mut col);
                    } else if ch == 'e' || ch == 'E' {
                        text.push(ch);
                        chars.next();
                        bump(ch, &mut line, &mut col);
                        if let Some(&sign) = chars.peek() {
                            if sign == '+' || sign == '-' {
                                text.push(sign);
                                chars.next();
                                bump(sign, &mut line, &mut col);
                            }
                        }
                    } else {
                        break;
                    }
                }
                match text.parse::<f64>() {
                    Ok(v) => {
                        tokens.push(Spanned { token: Token::Number(v), line: tline, col: tcol })
                    }
                    Err(_) => {
                        lex_error = Some(QasmError {
                            line: tline,
                            col: tcol,
                            kind: QasmErrorKind::BadNumber(text),
                        });
                        break;
                    }
                }
                continue;
            }
            if c == '"' {
                chars.next();
                bump(c, &mut line, &mut col);
                let mut text = String::new();
                let mut closed = false;
                while let Some(ch) = chars.next() {
                    bump(ch, &mut line, &mut col);
                    if ch == '"' {
                        closed = true;
                        break;
                    }
                    text.push(ch);
                }
                if !closed {
                    lex_error = Some(QasmError {
                        line: tline,
                        col: tcol,
                        kind: QasmErrorKind::UnexpectedEnd,
                    });
                    break;
                }
                tokens.push(Spanned { token: Token::StringLit(text), line: tline, col: tcol });
                continue;
            }
            if "[];,()*-+".contains(c) {
                chars.next();
                bump(c, &mut line, &mut col);
                tokens.push(Spanned { token: Token::Symbol(c), line: tline, col: tcol });
                continue;
            }
            lex_error = Some(QasmError {
                line: tline,
                col: tcol,
                kind: QasmErrorKind::UnexpectedChar(c),
            });
            break;
        }

        Self { tokens, pos: 0, end_line: line, end_col: col, lex_error }
    }

    fn err(&self, kind: QasmErrorKind) -> QasmError {
        let (line, col) = self
            .tokens
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or((self.end_line, self.end_col));
        QasmError { line, col, kind }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|t| &t.token)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|t| t.token.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect_symbol(&mut self, sym: char) -> Result<()> {
        match self.peek() {
            Some(Token::Symbol(c)) if *c == sym => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(QasmErrorKind::ExpectedToken(format!("`{sym}`")))),
        }
    }

    fn expect_ident(&mut self, name: &str) -> Result<()> {
        match self.peek() {
            Some(Token::Ident(id)) if id == name => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(QasmErrorKind::ExpectedToken(format!("`{name}`")))),
        }
    }

    fn expect_usize(&mut self) -> Result<usize> {
        match self.peek() {
            Some(Token::Number(v)) => {
                let v = *v;
                if v.fract() == 0.0 && v >= 0.0 && v <= usize::MAX as f64 {
                    self.pos += 1;
                    Ok(v as usize)
                } else {
                    Err(self.err(QasmErrorKind::BadNumber(format!("{v}"))))
                }
            }
            _ => Err(self.err(QasmErrorKind::ExpectedToken("an integer".to_string()))),
        }
    }

    fn parse(mut self) -> Result<QasmProgram> {
        if let Some(e) = self.lex_error.take() {
            // Token-level errors surface even if the prefix parses.
            self.lex_error = Some(e);
        }
        self.expect_ident("OPENQASM")?;
        match self.peek() {
            Some(Token::Number(v)) if *v == 2.0 => {
                self.pos += 1;
            }
            _ => return Err(self.err(QasmErrorKind::ExpectedToken("version `2.0`".to_string()))),
        }
        self.expect_symbol(';')?;

        if matches!(self.peek(), Some(Token::Ident(id)) if id == "include") {
            self.pos += 1;
            match self.advance() {
                Some(Token::StringLit(s)) if s == "qelib1.inc" => {}
                _ => {
                    self.pos = self.pos.saturating_sub(1);
                    return Err(self.err(QasmErrorKind::ExpectedToken(
                        "`\"qelib1.inc\"`".to_string(),
                    )));
                }
            }
            self.expect_symbol(';')?;
        }

        let mut register: Option<(String, usize)> = None;
        let mut statements = Vec::new();

        while let Some(token) = self.peek().cloned() {
            match token {
                Token::Ident(name) => match name.as_str() {
                    "qreg" => {
                        if register.is_some() {
                            return Err(self.err(QasmErrorKind::MultipleQreg));
                        }
                        self.pos += 1;
                        let reg_name = match self.advance() {
                            Some(Token::Ident(id)) => id,
                            _ => {
                                self.pos = self.pos.saturating_sub(1);
                                return Err(self.err(QasmErrorKind::ExpectedToken(
                                    "a register name".to_string(),
                                )));
                            }
                        };
                        self.expect_symbol('[')?;
                        let size = self.expect_usize()?;
                        self.expect_symbol(']')?;
                        self.expect_symbol(';')?;
                        register = Some((reg_name, size));
                    }
                    "creg" | "measure" | "barrier" | "reset" | "if" | "gate" | "opaque" => {
                        return Err(self.err(QasmErrorKind::UnsupportedStatement(name)));
                    }
                    _ => {
                        let kind = GateKind::from_name(&name)
                            .ok_or_else(|| self.err(QasmErrorKind::UnsupportedGate(name.clone())))?;
                        self.pos += 1;
                        let (reg_name, size) = register
                            .as_ref()
                            .ok_or_else(|| self.err(QasmErrorKind::MissingQreg))?;
                        let stmt = self.parse_statement(kind, &name, reg_name, *size)?;
                        statements.push(stmt);
                    }
                },
                _ => {
                    return Err(self.err(QasmErrorKind::ExpectedToken("a statement".to_string())))
                }
            }
        }

        if let Some(e) = self.lex_error {
            return Err(e);
        }
        let (register, n_qubits) =
            register.ok_or_else(|| self.err(QasmErrorKind::MissingQreg))?;
        Ok(QasmProgram { register, n_qubits, statements })
    }

    fn parse_statement(
        &mut self,
        kind: GateKind,
        name: &str,
        reg_name: &str,
        size: usize,
    ) -> Result<QasmStatement> {
        let mut params = Vec::new();
        if matches!(self.peek(), Some(Token::Symbol('('))) {
            self.pos += 1;
            loop {
                params.push(self.parse_expr()?);
                match self.peek() {
                    Some(Token::Symbol(',')) => {
                        self.pos += 1;
                    }
                    Some(Token::Symbol(')')) => {
                        self.pos += 1;
                        break;
                    }
                    _ => {
                        return Err(
                            self.err(QasmErrorKind::ExpectedToken("`,` or `)`".to_string()))
                        )
                    }
                }
            }
        }
        if params.len() != kind.n_params() {
            return Err(self.err(QasmErrorKind::WrongParamCount {
                gate: name.to_string(),
                expected: kind.n_params(),
                actual: params.len(),
            }));
        }

        let mut qubits = Vec::new();
        loop {
            match self.advance() {
                Some(Token::Ident(id)) => {
                    if id != reg_name {
                        self.pos = self.pos.saturating_sub(1);
                        return Err(self.err(QasmErrorKind::UnknownRegister(id)));
                    }
                }
                _ => {
                    self.pos = self.pos.saturating_sub(1);
                    return Err(self.err(QasmErrorKind::ExpectedToken("an operand".to_string())));
                }
            }
            self.expect_symbol('[')?;
            let index = self.expect_usize()?;
            self.expect_symbol(']')?;
            if index >= size {
                return Err(self.err(QasmErrorKind::OperandOutOfRange { index, size }));
            }
            qubits.push(index);
            match self.peek() {
                Some(Token::Symbol(',')) => {
                    self.pos += 1;
                }
                Some(Token::Symbol(';')) => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.err(QasmErrorKind::ExpectedToken("`,` or `;`".to_string()))),
            }
        }
        if qubits.len() != kind.n_qubits() {
            return Err(self.err(QasmErrorKind::WrongOperandCount {
                gate: name.to_string(),
                expected: kind.n_qubits(),
                actual: qubits.len(),
            }));
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(self.err(QasmErrorKind::DuplicateOperand(qubits[0])));
        }
        Ok(QasmStatement { kind, qubits, params })
    }

    /// expr := term (('*' | '/') term)*
    fn parse_expr(&mut self) -> Result<f64> {
        let mut value = self.parse_term()?;
        loop {
            match self.peek() {
                Some(Token::Symbol('*')) => {
                    self.pos += 1;
                    value *= self.parse_term()?;
                }
                Some(Token::Symbol('/')) => {
                    self.pos += 1;
                    value /= self.parse_term()?;
                }
                _ => break,
            }
        }
        if !value.is_finite() {
            return Err(self.err(QasmErrorKind::NonFiniteAngle));
        }
        Ok(value)
    }

    /// term := '-'* factor, factor := number | 'pi'
    fn parse_term(&mut self) -> Result<f64> {
        let mut sign = 1.0;
        while matches!(self.peek(), Some(Token::Symbol('-'))) {
            self.pos += 1;
            sign = -sign;
        }
        match self.advance() {
            Some(Token::Number(v)) => Ok(sign * v),
            Some(Token::Ident(id)) if id == "pi" => Ok(sign * std::f64::consts::PI),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err(QasmErrorKind::ExpectedToken("a number or `pi`".to_string())))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::inner_product;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_bell_pair() {
        let p = parse_qasm("OPENQASM 2.0; qreg q[2]; h q[0]; cx q[0],q[1];").unwrap();
        assert_eq!(p.n_qubits, 2);
        assert_eq!(p.statements.len(), 2);
        assert_eq!(p.statements[0].kind, GateKind::H);
        assert_eq!(p.statements[1].kind, GateKind::Cx);
        let state = to_feature_state(&p).unwrap();
        let f = std::f64::consts::FRAC_1_SQRT_2;
        assert!((state.amp(0).re - f).abs() < 1e-12);
        assert!((state.amp(3).re - f).abs() < 1e-12);
        assert!(state.amp(1).norm() < 1e-12);
        assert!(state.amp(2).norm() < 1e-12);
    }

    #[test]
    fn parses_pi_expressions() {
        let p = parse_qasm("OPENQASM 2.0;\nqreg q[1];\nrz(pi/2) q[0];").unwrap();
        assert_eq!(p.statements[0].params[0], std::f64::consts::FRAC_PI_2);
        let p = parse_qasm("OPENQASM 2.0; qreg q[1]; rz(-pi*0.25) q[0];").unwrap();
        assert_eq!(p.statements[0].params[0], -std::f64::consts::FRAC_PI_4);
    }

    #[test]
    fn u_is_an_alias_for_u3() {
        let a = parse_qasm("OPENQASM 2.0; qreg q[1]; u(0.1,0.2,0.3) q[0];").unwrap();
        let b = parse_qasm("OPENQASM 2.0; qreg q[1]; u3(0.1,0.2,0.3) q[0];").unwrap();
        assert_eq!(a.statements, b.statements);
        assert_eq!(a.statements[0].kind, GateKind::U3);
    }

    #[test]
    fn strips_comments_and_whitespace() {
        let src = "OPENQASM 2.0; // header\n  include \"qelib1.inc\";\nqreg r[3]; // reg\n// whole line\n  x   r[2]\n;\n";
        let p = parse_qasm(src).unwrap();
        assert_eq!(p.register, "r");
        assert_eq!(p.statements, vec![QasmStatement {
            kind: GateKind::X,
            qubits: vec![2],
            params: vec![]
        }]);
    }

    #[test]
    fn rejects_with_position() {
        let err = parse_qasm("OPENQASM 2.0;\nqreg q[2];\nfoo q[0];").unwrap_err();
        assert_eq!(err.line, 3);
        assert_eq!(err.col, 1);
        assert!(matches!(err.kind, QasmErrorKind::UnsupportedGate(_)));

        let err = parse_qasm("OPENQASM 2.0; qreg q[2]; measure q[0];").unwrap_err();
        assert!(matches!(err.kind, QasmErrorKind::UnsupportedStatement(_)));

        let err = parse_qasm("OPENQASM 2.0; qreg q[2]; creg c[2];").unwrap_err();
        assert!(matches!(err.kind, QasmErrorKind::UnsupportedStatement(_)));

        let err = parse_qasm("OPENQASM 2.0; qreg q[2]; x q[5];").unwrap_err();
        assert!(matches!(err.kind, QasmErrorKind::OperandOutOfRange { index: 5, size: 2 }));

        let err = parse_qasm("OPENQASM 2.0; qreg q[2]; qreg p[2];").unwrap_err();
        assert!(matches!(err.kind, QasmErrorKind::MultipleQreg));

        let err = parse_qasm("OPENQASM 2.0; qreg q[2]; cx q[1],q[1];").unwrap_err();
        assert!(matches!(err.kind, QasmErrorKind::DuplicateOperand(1)));
    }

    fn random_program(rng: &mut ChaCha8Rng, n_qubits: usize, len: usize) -> QasmProgram {
        use GateKind::*;
        let mut kinds = vec![H, X, Y, Z, S, Sdg, T, Tdg, Rx, Ry, Rz, U3];
        if n_qubits >= 2 {
            kinds.push(Cx);
            kinds.push(Cz);
        }
        let statements = (0..len)
            .map(|_| {
                let kind = kinds[rng.gen_range(0..kinds.len())];
                let params = (0..kind.n_params())
                    .map(|_| rng.gen_range(-10.0..10.0))
                    .collect();
                let q0 = rng.gen_range(0..n_qubits);
                let qubits = if kind.n_qubits() == 2 {
                    let mut q1 = rng.gen_range(0..n_qubits);
                    while q1 == q0 {
                        q1 = rng.gen_range(0..n_qubits);
                    }
                    vec![q0, q1]
                } else {
                    vec![q0]
                };
                QasmStatement { kind, qubits, params }
            })
            .collect();
        QasmProgram { register: "q".to_string(), n_qubits, statements }
    }

    #[test]
    fn print_reparse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let p = random_program(&mut rng, 4, 12);
            let text = p.to_string();
            let back = parse_qasm(&text).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn empty_program_gives_zero_state() {
        let p = parse_qasm("OPENQASM 2.0; qreg q[3];").unwrap();
        let state = to_feature_state(&p).unwrap();
        assert!((state.amp(0).re - 1.0).abs() < 1e-15);
        assert!((state.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_hadamard_on_one_qubit() {
        let p = parse_qasm("OPENQASM 2.0; qreg q[1]; h q[0];").unwrap();
        let state = to_feature_state(&p).unwrap();
        let f = std::f64::consts::FRAC_1_SQRT_2;
        assert!((state.amp(0).re - f).abs() < 1e-14);
        assert!((state.amp(1).re - f).abs() < 1e-14);
    }

    #[test]
    fn feature_state_matches_dense_unitary_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..10 {
            let n = rng.gen_range(1..=4);
            let p = random_program(&mut rng, n, 10);
            let fast = to_feature_state(&p).unwrap();

            // Dense oracle: build each statement's full 2^n×2^n matrix by
            // applying it to every basis state, then chain matrix products.
            let dim = 1usize << n;
            let mut amps = vec![Complex64::new(0.0, 0.0); dim];
            amps[0] = Complex64::new(1.0, 0.0);
            let mut state = amps;
            for s in &p.statements {
                let mut cols = Vec::with_capacity(dim);
                for b in 0..dim {
                    let basis = StateVector::computational_basis(n, b);
                    cols.push(apply_statement(&basis, s));
                }
                let mut next = vec![Complex64::new(0.0, 0.0); dim];
                for (b, col) in cols.iter().enumerate() {
                    for (r, amp) in col.amps().iter().enumerate() {
                        next[r] += amp * state[b];
                    }
                }
                state = next;
            }
            let oracle = StateVector::from_amps(n, state).unwrap();
            let overlap = inner_product(&oracle, &fast).unwrap();
            assert!((overlap.norm() - 1.0).abs() < 1e-10);
            for (a, b) in fast.amps().iter().zip(oracle.amps()) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_oversized_register_simulation() {
        let p = parse_qasm("OPENQASM 2.0; qreg q[40];").unwrap();
        assert!(matches!(
            to_feature_state(&p).unwrap_err().kind,
            QasmErrorKind::TooManyQubits { .. }
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        /// Parser totality: arbitrary input never panics.
        #[test]
        fn parser_total_on_arbitrary_strings(s in "\\PC*") {
            let _ = parse_qasm(&s);
        }

        /// Mutations of a valid program never panic either.
        #[test]
        fn parser_total_on_mutated_programs(
            seed in 0u64..1000,
            cut in 0usize..200,
            insert in "[a-z0-9\\[\\];,()*/\\-\" ]{0,8}",
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_program(&mut rng, 3, 6);
            let mut text = p.to_string();
            let pos = cut.min(text.len());
            while !text.is_char_boundary(pos.min(text.len())) { text.pop(); }
            text.insert_str(pos.min(text.len()), &insert);
            let _ = parse_qasm(&text);
        }
    }
}
