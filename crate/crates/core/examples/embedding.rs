//! Embed prompts with the hashing fallback and compare them by cosine.
//!
//! `cargo run --example embedding [PROMPT...]`

use promptrl::embedding::{fallback_embed, DEFAULT_DIM};

fn main() {
    let mut prompts: Vec<String> = std::env::args().skip(1).collect();
    if prompts.is_empty() {
        prompts = vec![
            "Write a function to count vowels in a word.".into(),
            "Write a Python function count_vowels(word) that returns the number of vowels.".into(),
            "Merge two sorted lists into one sorted list.".into(),
        ];
    }
    let states: Vec<_> = prompts.iter().map(|p| fallback_embed(p, DEFAULT_DIM)).collect();
    for (p, s) in prompts.iter().zip(&states) {
        println!("dim {} norm {:.3}  {p}", s.dim(), s.norm());
    }
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            println!("cos({i}, {j}) = {:.3}", states[i].cosine(&states[j]));
        }
    }
}
