//! A forgiving SQL lexer. It never fails: characters it does not recognize
//! become single-character tokens, so broken statements still lex.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    /// Reserved word, stored upper-cased.
    Keyword(String),
    /// Identifier as written, including dotted chains (`p.ra`,
    /// `db..table`), bracket-quoted parts (`s.[dec]`), double-quoted
    /// names, `@variables` and `#temp` tables.
    Ident(String),
    /// Numeric literal text: integer, decimal, scientific or hex.
    Number(String),
    /// Single-quoted string literal content, unescaped.
    Str(String),
    /// Operator such as `>=`, `+` or `|`.
    Op(String),
    /// `(` `)` `,` `;` or a lone `.`
    Punct(char),
    /// A bare `#`, the masked-number placeholder.
    Placeholder,
    /// Any other character.
    Other(char),
}

impl Token {
    /// Text that lexes back to this same token.
    pub fn render(&self) -> String {
        match self {
            Token::Keyword(k) => k.clone(),
            Token::Ident(i) => i.clone(),
            Token::Number(n) => n.clone(),
            Token::Str(s) => format!("'{}'", s.replace('\'', "''")),
            Token::Op(o) => o.clone(),
            Token::Punct(c) | Token::Other(c) => c.to_string(),
            Token::Placeholder => "#".to_string(),
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self, Token::Keyword(k) if k == kw)
    }

    pub fn is_punct(&self, c: char) -> bool {
        matches!(self, Token::Punct(p) if *p == c)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Words folded to upper case and treated as keywords rather than
/// identifiers. Includes the common aggregate functions and type names.
pub const KEYWORDS: &[&str] = &[
    "ADD", "ALL", "ALTER", "AND", "ANY", "APPLY", "AS", "ASC", "AVG", "BEGIN", "BETWEEN", "BIGINT",
    "BIT", "BY", "CASE", "CAST", "CHAR", "CONVERT", "COUNT", "COUNT_BIG", "CREATE", "CROSS",
    "DECIMAL", "DECLARE", "DELETE", "DESC", "DISTINCT", "DROP", "ELSE", "END", "ESCAPE", "EXCEPT",
    "EXEC", "EXECUTE", "EXISTS", "FALSE", "FLOAT", "FROM", "FULL", "FUNCTION", "GROUP", "HAVING",
    "IF", "IN", "INDEX", "INNER", "INSERT", "INT", "INTEGER", "INTERSECT", "INTO", "IS", "JOIN",
    "KEY", "LEFT", "LIKE", "LIMIT", "MAX", "MIN", "NOLOCK", "NOT", "NULL", "NUMERIC", "NVARCHAR",
    "OFFSET", "ON", "OR", "ORDER", "OUTER", "OVER", "PARTITION", "PERCENT", "PRIMARY",
    "PROCEDURE", "REAL", "RETURN", "RETURNS", "RIGHT", "SELECT", "SET", "SMALLINT", "SOME", "SUM",
    "TABLE", "THEN", "TINYINT", "TOP", "TRUE", "UNION", "UPDATE", "VALUES", "VARCHAR", "VIEW",
    "WHEN", "WHERE", "WHILE", "WITH",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

fn ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '@'
}

fn ident_continue(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '$' | '@' | '#')
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
}

impl Lexer {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while self.peek(0).is_some_and(&f) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    /// `[name]` starting at the current position, or `None` if unterminated.
    fn bracket_part(&mut self) -> Option<String> {
        let close = self.chars[self.pos..].iter().position(|&c| c == ']')?;
        let part: String = self.chars[self.pos..self.pos + close + 1].iter().collect();
        if part[1..part.len() - 1].contains('[') {
            return None;
        }
        self.pos += close + 1;
        Some(part)
    }

    /// `"name"` starting at the current position, or `None` if unterminated.
    fn dquote_part(&mut self) -> Option<String> {
        let close = self.chars[self.pos + 1..].iter().position(|&c| c == '"')?;
        let part: String = self.chars[self.pos..self.pos + close + 2].iter().collect();
        self.pos += close + 2;
        Some(part)
    }

    /// One name part: plain word, `[bracketed]` or `"quoted"`.
    fn name_part(&mut self) -> Option<String> {
        match self.peek(0)? {
            '[' => self.bracket_part(),
            '"' => self.dquote_part(),
            '#' if self.peek(1).is_some_and(ident_continue) => {
                self.pos += 1;
                Some(format!("#{}", self.take_while(ident_continue)))
            }
            c if ident_start(c) => Some(self.take_while(ident_continue)),
            _ => None,
        }
    }

    /// Extends `head` with `.part` / `..part` / `.*` suffixes.
    fn chain(&mut self, mut head: String) -> String {
        loop {
            let mut dots = 0;
            while self.peek(dots) == Some('.') {
                dots += 1;
            }
            if dots == 0 || dots > 2 {
                return head;
            }
            let save = self.pos;
            self.pos += dots;
            if self.peek(0) == Some('*') {
                self.pos += 1;
                head.push_str(&".".repeat(dots));
                head.push('*');
                return head;
            }
            match self.name_part() {
                Some(part) => {
                    head.push_str(&".".repeat(dots));
                    head.push_str(&part);
                }
                None => {
                    self.pos = save;
                    return head;
                }
            }
        }
    }

    fn number(&mut self) -> String {
        let start = self.pos;
        if self.peek(0) == Some('0')
            && matches!(self.peek(1), Some('x' | 'X'))
            && self.peek(2).is_some_and(|c| c.is_ascii_hexdigit())
        {
            self.pos += 2;
            self.take_while(|c| c.is_ascii_hexdigit());
            return self.chars[start..self.pos].iter().collect();
        }
        self.take_while(|c| c.is_ascii_digit());
        if self.peek(0) == Some('.') && self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
            self.take_while(|c| c.is_ascii_digit());
        } else if self.peek(0) == Some('.') && self.pos > start && !self.peek(1).is_some_and(|c| c == '.') {
            // trailing dot: `1.`
            self.pos += 1;
        }
        if matches!(self.peek(0), Some('e' | 'E')) {
            let sign = usize::from(matches!(self.peek(1), Some('+' | '-')));
            if self.peek(1 + sign).is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1 + sign;
                self.take_while(|c| c.is_ascii_digit());
            }
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn string(&mut self) -> String {
        // opening quote
        self.pos += 1;
        let mut out = String::new();
        while let Some(c) = self.peek(0) {
            self.pos += 1;
            if c == '\'' {
                if self.peek(0) == Some('\'') {
                    self.pos += 1;
                    out.push('\'');
                } else {
                    return out;
                }
            } else {
                out.push(c);
            }
        }
        // unterminated: the rest of the input is string content
        out
    }

    fn skip_trivia(&mut self) {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_whitespace() => self.pos += 1,
                (Some('-'), Some('-')) => {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.pos += 1;
                    }
                }
                (Some('/'), Some('*')) => {
                    self.pos += 2;
                    while self.pos < self.chars.len()
                        && !(self.peek(0) == Some('*') && self.peek(1) == Some('/'))
                    {
                        self.pos += 1;
                    }
                    self.pos = (self.pos + 2).min(self.chars.len());
                }
                _ => return,
            }
        }
    }

    fn next_token(&mut self) -> Option<Token> {
        self.skip_trivia();
        let c = self.peek(0)?;
        let next = self.peek(1);
        let tok = match c {
            '\'' => Token::Str(self.string()),
            '0'..='9' => Token::Number(self.number()),
            '.' if next.is_some_and(|d| d.is_ascii_digit()) => Token::Number(self.number()),
            '#' if !next.is_some_and(ident_continue) => {
                self.pos += 1;
                Token::Placeholder
            }
            '[' | '"' | '#' => match self.name_part() {
                Some(head) => Token::Ident(self.chain(head)),
                None => {
                    self.pos += 1;
                    Token::Other(c)
                }
            },
            c if ident_start(c) => {
                let word = self.take_while(ident_continue);
                let upper = word.to_uppercase();
                let chained = self.chain(word);
                if is_keyword(&upper) && chained.len() == upper.len() {
                    Token::Keyword(upper)
                } else {
                    Token::Ident(chained)
                }
            }
            '(' | ')' | ',' | ';' | '.' => {
                self.pos += 1;
                Token::Punct(c)
            }
            '<' | '>' | '!' | '=' => {
                let two: String = [c, next.unwrap_or(' ')].iter().collect();
                if matches!(two.as_str(), "<=" | ">=" | "<>" | "!=" | "!<" | "!>" | "==") {
                    self.pos += 2;
                    Token::Op(two)
                } else if c == '!' {
                    self.pos += 1;
                    Token::Other(c)
                } else {
                    self.pos += 1;
                    Token::Op(c.to_string())
                }
            }
            '|' if next == Some('|') => {
                self.pos += 2;
                Token::Op("||".into())
            }
            '+' | '-' | '*' | '/' | '%' | '&' | '|' | '^' | '~' => {
                self.pos += 1;
                Token::Op(c.to_string())
            }
            _ => {
                self.pos += 1;
                Token::Other(c)
            }
        };
        Some(tok)
    }
}

/// Lexes a statement. Whitespace and comments are dropped; keywords are
/// upper-cased; everything else keeps its spelling.
pub fn tokenize_sql(statement: &str) -> Vec<Token> {
    let mut lexer = Lexer {
        chars: statement.chars().collect(),
        pos: 0,
    };
    let mut out = Vec::new();
    while let Some(tok) = lexer.next_token() {
        out.push(tok);
    }
    out
}

/// Space-joined rendering of a token list.
pub fn render_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.render());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kw(s: &str) -> Token {
        Token::Keyword(s.into())
    }
    fn id(s: &str) -> Token {
        Token::Ident(s.into())
    }
    fn num(s: &str) -> Token {
        Token::Number(s.into())
    }

    #[test]
    fn keyword_table_is_sorted() {
        assert!(KEYWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn simple_select() {
        assert_eq!(
            tokenize_sql("select top 10 ra from P"),
            vec![kw("SELECT"), kw("TOP"), num("10"), id("ra"), kw("FROM"), id("P")]
        );
    }

    #[test]
    fn function_call_with_dotted_args() {
        assert_eq!(
            tokenize_sql("str(p.g - p.r,11,8)"),
            vec![
                id("str"),
                Token::Punct('('),
                id("p.g"),
                Token::Op("-".into()),
                id("p.r"),
                Token::Punct(','),
                num("11"),
                Token::Punct(','),
                num("8"),
                Token::Punct(')'),
            ]
        );
    }

    #[test]
    fn doubled_quote_escape() {
        assert_eq!(
            tokenize_sql("where x = 'it''s'"),
            vec![kw("WHERE"), id("x"), Token::Op("=".into()), Token::Str("it's".into())]
        );
    }

    #[test]
    fn number_forms() {
        for n in ["12", "1.5", ".5", "1e10", "2.5E-3", "0x1F", "7."] {
            assert_eq!(tokenize_sql(n), vec![num(n)], "{n}");
        }
        assert_eq!(tokenize_sql("10x"), vec![num("10"), id("x")]);
        assert_eq!(tokenize_sql("1e"), vec![num("1"), id("e")]);
    }

    #[test]
    fn identifier_forms() {
        assert_eq!(tokenize_sql("BESTDR2..PhotoObjAll"), vec![id("BESTDR2..PhotoObjAll")]);
        assert_eq!(tokenize_sql("s.[dec]"), vec![id("s.[dec]")]);
        assert_eq!(tokenize_sql("[dec]"), vec![id("[dec]")]);
        assert_eq!(tokenize_sql("\"My Col\""), vec![id("\"My Col\"")]);
        assert_eq!(tokenize_sql("#upload up"), vec![id("#upload"), id("up")]);
        assert_eq!(tokenize_sql("@ra"), vec![id("@ra")]);
        assert_eq!(tokenize_sql("mytable_61"), vec![id("mytable_61")]);
        assert_eq!(tokenize_sql("p.*"), vec![id("p.*")]);
        assert_eq!(tokenize_sql("dbo.fGetNearbyObjEq"), vec![id("dbo.fGetNearbyObjEq")]);
        // a keyword used as a qualifier is an identifier chain
        assert_eq!(tokenize_sql("top.x"), vec![id("top.x")]);
    }

    #[test]
    fn placeholders_and_junk() {
        assert_eq!(
            tokenize_sql("a >= # ? $"),
            vec![id("a"), Token::Op(">=".into()), Token::Placeholder, Token::Other('?'), Token::Other('$')]
        );
        assert_eq!(tokenize_sql("[open"), vec![Token::Other('['), id("open")]);
        assert_eq!(tokenize_sql("'open"), vec![Token::Str("open".into())]);
        assert_eq!(tokenize_sql("x. y"), vec![id("x"), Token::Punct('.'), id("y")]);
    }

    #[test]
    fn comments_dropped() {
        assert_eq!(
            tokenize_sql("select -- note\n 1 /* block */ , 2 /* open"),
            vec![kw("SELECT"), num("1"), Token::Punct(','), num("2")]
        );
        assert!(tokenize_sql("  \n\t").is_empty());
    }

    #[test]
    fn render_round_trip() {
        let src = "SELECT TOP 10 ph.ra,ph.dec, str(ph.g - ph.r,11 ? ) as color, 'it''s' \
                   FROM #x x, BESTDR2..PhotoObjAll as ph WHERE (a<>b OR c!=1.5e3) AND d||'q' ! 0x0F";
        let toks = tokenize_sql(src);
        assert_eq!(tokenize_sql(&render_tokens(&toks)), toks);
    }
}
