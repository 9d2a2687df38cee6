//! Reduction of a template to the canonical token stream used for term
//! frequencies and n-gram matching.
//!
//! Rules, applied in order:
//! 1. `AS alias` pairs are dropped; when the aliased item is a plain name
//!    the alias is remembered so later bare uses resolve to that name.
//! 2. Parentheses are dropped, as are `@parameter` names inside function
//!    call argument lists.
//! 3. Multi-word keywords are merged with `_` (`GROUP_BY`, `LEFT_OUTER_JOIN`).
//! 4. Literals and operators become placeholders: `#`, `STR`, `CMP`,
//!    `ARITH`, `LOGIC`, `BITOP`. A `*` used as a select-list wildcard stays
//!    `*`.
//! 5. Qualified names keep only their final part, unquoted and lower-cased.

use std::collections::HashMap;

use super::lexer::Token;
use super::template::template_tokens;

pub const PLACEHOLDERS: [&str; 6] = ["#", "STR", "CMP", "ARITH", "LOGIC", "BITOP"];

/// Multi-word keywords, longest first within each shared prefix.
pub const MERGED_KEYWORDS: &[&[&str]] = &[
    &["LEFT", "OUTER", "JOIN"],
    &["RIGHT", "OUTER", "JOIN"],
    &["FULL", "OUTER", "JOIN"],
    &["IS", "NOT", "NULL"],
    &["GROUP", "BY"],
    &["ORDER", "BY"],
    &["PARTITION", "BY"],
    &["LEFT", "JOIN"],
    &["RIGHT", "JOIN"],
    &["FULL", "JOIN"],
    &["INNER", "JOIN"],
    &["CROSS", "JOIN"],
    &["CROSS", "APPLY"],
    &["OUTER", "APPLY"],
    &["UNION", "ALL"],
    &["IS", "NULL"],
];

const COMPARISON_OPS: [&str; 10] = ["=", "<", ">", "<=", ">=", "<>", "!=", "!<", "!>", "=="];
const ARITH_OPS: [&str; 6] = ["+", "-", "*", "/", "%", "||"];
const BIT_OPS: [&str; 4] = ["&", "|", "^", "~"];

/// Ordered canonical tokens of a simplified template.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenStream {
    pub tokens: Vec<String>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

/// Final component of a possibly qualified, possibly quoted name.
pub fn base_name(name: &str) -> String {
    let last = name.rsplit('.').find(|p| !p.is_empty()).unwrap_or("");
    let unquoted = last
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .or_else(|| last.strip_prefix('"').and_then(|s| s.strip_suffix('"')))
        .unwrap_or(last);
    unquoted.to_lowercase()
}

fn is_wildcard(prev: Option<&Token>, prev2: Option<&Token>) -> bool {
    match prev {
        None => true,
        Some(Token::Punct('(' | ',')) => true,
        Some(Token::Keyword(k)) => matches!(k.as_str(), "SELECT" | "DISTINCT" | "ALL" | "PERCENT"),
        Some(Token::Placeholder | Token::Number(_)) => {
            matches!(prev2, Some(Token::Keyword(k)) if k == "TOP")
        }
        _ => false,
    }
}

enum Item {
    Tok(Token),
    Wildcard,
}

/// Simplifies a template (or any statement; it is templated first).
pub fn simplify_template(template_text: &str) -> TokenStream {
    let tokens = template_tokens(template_text);

    // rules 1 and 2, plus wildcard detection against the original context
    let mut aliases: HashMap<String, String> = HashMap::new();
    let mut kept: Vec<Item> = Vec::with_capacity(tokens.len());
    let mut call_stack: Vec<bool> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        let prev = i.checked_sub(1).map(|p| &tokens[p]);
        match tok {
            Token::Keyword(k) if k == "AS" => {
                if let Some(Token::Ident(alias)) = tokens.get(i + 1) {
                    if let Some(Item::Tok(Token::Ident(target))) = kept.last() {
                        let alias = base_name(alias);
                        let target = base_name(target);
                        if alias != target && !alias.is_empty() {
                            aliases.entry(alias).or_insert(target);
                        }
                    }
                    i += 2;
                    continue;
                }
                kept.push(Item::Tok(tok.clone()));
            }
            Token::Punct('(') => {
                call_stack.push(matches!(prev, Some(Token::Ident(_))));
            }
            Token::Punct(')') => {
                call_stack.pop();
            }
            Token::Ident(name)
                if name.starts_with('@') && call_stack.last().copied().unwrap_or(false) => {}
            Token::Op(op) if op == "*" && is_wildcard(prev, i.checked_sub(2).map(|p| &tokens[p])) => {
                kept.push(Item::Wildcard);
            }
            _ => kept.push(Item::Tok(tok.clone())),
        }
        i += 1;
    }

    // rules 3 to 5
    let mut out = Vec::with_capacity(kept.len());
    let mut j = 0;
    'outer: while j < kept.len() {
        for pattern in MERGED_KEYWORDS {
            let matched = pattern.iter().enumerate().all(|(off, word)| {
                matches!(kept.get(j + off), Some(Item::Tok(t)) if t.is_keyword(word))
            });
            if matched {
                out.push(pattern.join("_"));
                j += pattern.len();
                continue 'outer;
            }
        }
        let mapped = match &kept[j] {
            Item::Wildcard => Some("*".to_string()),
            Item::Tok(tok) => map_token(tok, &aliases),
        };
        out.extend(mapped);
        j += 1;
    }
    TokenStream { tokens: out }
}

fn map_token(tok: &Token, aliases: &HashMap<String, String>) -> Option<String> {
    let s = match tok {
        Token::Str(_) => "STR".to_string(),
        Token::Number(_) | Token::Placeholder => "#".to_string(),
        Token::Op(op) if COMPARISON_OPS.contains(&op.as_str()) => "CMP".to_string(),
        Token::Op(op) if ARITH_OPS.contains(&op.as_str()) => "ARITH".to_string(),
        Token::Op(op) if BIT_OPS.contains(&op.as_str()) => "BITOP".to_string(),
        Token::Op(op) => op.clone(),
        Token::Keyword(k) => match k.as_str() {
            "BETWEEN" | "LIKE" | "IN" => "CMP".to_string(),
            "AND" | "OR" | "NOT" => "LOGIC".to_string(),
            _ => k.clone(),
        },
        Token::Ident(name) => {
            let base = base_name(name);
            if base.is_empty() {
                return None;
            }
            aliases.get(&base).cloned().unwrap_or(base)
        }
        Token::Punct('(' | ')') => return None,
        Token::Punct(c) | Token::Other(c) => c.to_string(),
    };
    Some(s)
}
