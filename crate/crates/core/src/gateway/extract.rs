/// Pull the executable program out of raw model output.
///
/// Takes the body of the first closed ``` fence if there is one, then drops
/// any leading lines before the first top-level code line (`def`, `class`,
/// `import`, `from`, `async def`, or a decorator). Text with neither passes
/// through unchanged. The function is idempotent.
pub fn extract_code(raw_text: &str, _entry_point: Option<&str>) -> String {
    let body = first_fenced_block(raw_text).unwrap_or(raw_text);
    code_suffix(body).to_string()
}

fn first_fenced_block(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    // the rest of the opening line is an info string (language tag)
    let after_open = &text[open + 3..];
    let body_start = after_open.find('\n')? + 1;
    let body = &after_open[body_start..];
    let close = body.find("```")?;
    let inner = &body[..close];
    Some(inner.strip_suffix('\n').unwrap_or(inner))
}

fn is_code_start(line: &str) -> bool {
    ["def ", "async def ", "class ", "import ", "from ", "@"]
        .iter()
        .any(|p| line.starts_with(p))
}

fn code_suffix(text: &str) -> &str {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if is_code_start(line) {
            return &text[offset..];
        }
        offset += line.len();
    }
    text
}
