//! A hermetic 40-task curriculum for end-to-end learning experiments.
//!
//! Every task starts from a vague prompt. [`REWRITES_NEEDED`] scripted
//! rewrites in a row reach a prompt containing `explicit typed signature`,
//! the only thing the scripted generator answers with fully passing code.
//! Intermediate prompts sometimes earn partial credit that grows with each
//! stage. Genetic mutation can assemble the
//! phrase from the prompt's own tokens, but rarely, and it usually scrambles
//! the wording the rewriter keys on, after which rewrites stop helping.
//! Direct generation leaves the prompt alone.

use std::path::Path;

use crate::corpus::{Corpus, CorpusError, Task};
use crate::env::RewardMode;
use crate::gateway::{MockRule, Role};
use crate::sandbox::{FakeOutcome, FakeRule, FakeTable};

/// The phrase that unlocks fully passing code.
pub const KEY_PHRASE: &str = "explicit typed signature";

pub const OUTCOME_FULL: &str = "# outcome: full";
pub const OUTCOME_NONE: &str = "# outcome: none";
pub const OUTCOME_SYNTAX: &str = "# outcome: syntax";

struct Topic {
    entry: &'static str,
    args: &'static str,
    phrase: &'static str,
    tests: [&'static str; 3],
}

macro_rules! topic {
    ($e:literal, $a:literal, $p:literal, [$t1:literal, $t2:literal, $t3:literal]) => {
        Topic {
            entry: $e,
            args: $a,
            phrase: $p,
            tests: [$t1, $t2, $t3],
        }
    };
}

const TOPICS: [Topic; 40] = [
    topic!("count_vowels", "word", "count the vowels in a word", ["count_vowels('banana') == 3", "count_vowels('sky') == 0", "count_vowels('AEIOU') == 5"]),
    topic!("reverse_words", "sentence", "reverse the order of words in a sentence", ["reverse_words('a b c') == 'c b a'", "reverse_words('hi') == 'hi'", "reverse_words('') == ''"]),
    topic!("max_gap", "nums", "find the largest difference between neighbouring numbers", ["max_gap([1, 5, 2]) == 4", "max_gap([3, 3]) == 0", "max_gap([10, 1, 8]) == 9"]),
    topic!("is_palindrome", "text", "decide whether a string reads the same backwards", ["is_palindrome('level')", "not is_palindrome('abc')", "is_palindrome('')"]),
    topic!("sum_digits", "n", "add up the decimal digits of a number", ["sum_digits(123) == 6", "sum_digits(0) == 0", "sum_digits(905) == 14"]),
    topic!("find_tuples", "pairs, k", "find all tuples in a list that match a given condition", ["find_tuples([(1, 2), (3,)], 2) == [(1, 2)]", "find_tuples([(1,)], 1) == [(1,)]", "find_tuples([], 3) == []"]),
    topic!("second_largest", "nums", "pick the runner up value from a collection", ["second_largest([1, 3, 2]) == 2", "second_largest([5, 5, 4]) == 4", "second_largest([9, 1]) == 1"]),
    topic!("merge_sorted", "a, b", "combine two ordered lists into one ordered list", ["merge_sorted([1, 3], [2]) == [1, 2, 3]", "merge_sorted([], [1]) == [1]", "merge_sorted([2], []) == [2]"]),
    topic!("char_histogram", "text", "tally how often each character appears", ["char_histogram('aab') == {'a': 2, 'b': 1}", "char_histogram('') == {}", "char_histogram('z') == {'z': 1}"]),
    topic!("rotate_left", "items, k", "shift list elements around by some positions", ["rotate_left([1, 2, 3], 1) == [2, 3, 1]", "rotate_left([1], 5) == [1]", "rotate_left([1, 2], 0) == [1, 2]"]),
    topic!("flatten_once", "nested", "remove one level of nesting from a list of lists", ["flatten_once([[1], [2, 3]]) == [1, 2, 3]", "flatten_once([]) == []", "flatten_once([[]]) == []"]),
    topic!("is_prime", "n", "check if a number has no divisors other than one and itself", ["is_prime(7)", "not is_prime(9)", "not is_prime(1)"]),
    topic!("gcd", "a, b", "compute the greatest common divisor of two integers", ["gcd(12, 18) == 6", "gcd(7, 3) == 1", "gcd(0, 5) == 5"]),
    topic!("capitalize_words", "sentence", "make the first letter of every word upper case", ["capitalize_words('a b') == 'A B'", "capitalize_words('hello') == 'Hello'", "capitalize_words('') == ''"]),
    topic!("dedupe", "items", "drop repeated entries while keeping the first occurrence", ["dedupe([1, 1, 2]) == [1, 2]", "dedupe([]) == []", "dedupe([3, 2, 3]) == [3, 2]"]),
    topic!("running_total", "nums", "produce the cumulative sums of a sequence", ["running_total([1, 2, 3]) == [1, 3, 6]", "running_total([]) == []", "running_total([5]) == [5]"]),
    topic!("count_words", "text", "report how many words a piece of text contains", ["count_words('a b c') == 3", "count_words('') == 0", "count_words('one') == 1"]),
    topic!("binary_string", "n", "write a non negative integer in base two", ["binary_string(5) == '101'", "binary_string(0) == '0'", "binary_string(8) == '1000'"]),
    topic!("median", "nums", "locate the middle value of some numbers", ["median([3, 1, 2]) == 2", "median([1, 2, 3, 4]) == 2.5", "median([7]) == 7"]),
    topic!("chunk", "items, size", "split a sequence into pieces of equal length", ["chunk([1, 2, 3], 2) == [[1, 2], [3]]", "chunk([], 3) == []", "chunk([1], 1) == [[1]]"]),
    topic!("anagrams", "a, b", "tell whether two strings use exactly the same letters", ["anagrams('listen', 'silent')", "not anagrams('ab', 'abc')", "anagrams('', '')"]),
    topic!("fizzbuzz", "n", "list the classic fizz and buzz words up to a bound", ["fizzbuzz(3)[-1] == 'Fizz'", "fizzbuzz(1) == ['1']", "len(fizzbuzz(15)) == 15"]),
    topic!("matrix_transpose", "rows", "swap the rows and columns of a grid", ["matrix_transpose([[1, 2]]) == [[1], [2]]", "matrix_transpose([]) == []", "matrix_transpose([[1], [2]]) == [[1, 2]]"]),
    topic!("longest_run", "items", "measure the longest stretch of equal neighbours", ["longest_run([1, 1, 2]) == 2", "longest_run([]) == 0", "longest_run([4]) == 1"]),
    topic!("caesar_shift", "text, k", "move every letter forward in the alphabet", ["caesar_shift('abc', 1) == 'bcd'", "caesar_shift('z', 1) == 'a'", "caesar_shift('', 3) == ''"]),
    topic!("digits_sorted", "n", "arrange the digits of a number from small to large", ["digits_sorted(312) == 123", "digits_sorted(5) == 5", "digits_sorted(900) == 9"]),
    topic!("pair_sum", "nums, target", "search for two entries adding up to a goal", ["pair_sum([1, 2, 3], 5)", "not pair_sum([1, 1], 5)", "not pair_sum([], 0)"]),
    topic!("leap_year", "year", "say whether a calendar year has an extra day", ["leap_year(2000)", "not leap_year(1900)", "leap_year(2024)"]),
    topic!("strip_vowels", "text", "delete every vowel from a string", ["strip_vowels('banana') == 'bnn'", "strip_vowels('') == ''", "strip_vowels('xyz') == 'xyz'"]),
    topic!("product", "nums", "multiply the numbers of a list together", ["product([2, 3]) == 6", "product([]) == 1", "product([0, 9]) == 0"]),
    topic!("nth_fibonacci", "n", "return a term of the famous rabbit sequence", ["nth_fibonacci(0) == 0", "nth_fibonacci(1) == 1", "nth_fibonacci(10) == 55"]),
    topic!("common_prefix", "words", "derive the shared beginning of several strings", ["common_prefix(['flow', 'flower']) == 'flow'", "common_prefix([]) == ''", "common_prefix(['a', 'b']) == ''"]),
    topic!("count_positive", "nums", "figure out how many values are above zero", ["count_positive([1, -1, 2]) == 2", "count_positive([]) == 0", "count_positive([0]) == 0"]),
    topic!("title_case", "text", "format a heading so each word starts with a capital", ["title_case('the end') == 'The End'", "title_case('') == ''", "title_case('x') == 'X'"]),
    topic!("split_evens", "nums", "separate the even from the odd numbers", ["split_evens([1, 2, 3]) == ([2], [1, 3])", "split_evens([]) == ([], [])", "split_evens([4]) == ([4], [])"]),
    topic!("to_minutes", "hours, minutes", "convert a clock duration into a total number of minutes", ["to_minutes(1, 30) == 90", "to_minutes(0, 0) == 0", "to_minutes(2, 5) == 125"]),
    topic!("kth_smallest", "nums, k", "retrieve the value at a given rank after ordering", ["kth_smallest([3, 1, 2], 1) == 1", "kth_smallest([5, 4], 2) == 5", "kth_smallest([7], 1) == 7"]),
    topic!("balanced_parens", "text", "verify that brackets open and close properly", ["balanced_parens('(())')", "not balanced_parens('(()')", "balanced_parens('')"]),
    topic!("squares_upto", "n", "generate the perfect squares not exceeding a limit", ["squares_upto(10) == [1, 4, 9]", "squares_upto(0) == []", "squares_upto(1) == [1]"]),
    topic!("word_lengths", "sentence", "map each word of a sentence to its size", ["word_lengths('ab c') == [2, 1]", "word_lengths('') == []", "word_lengths('hey') == [3]"]),
];

/// Rewrites needed before the prompt carries the key phrase.
pub const REWRITES_NEEDED: usize = 8;

/// Tests per task; intermediate stage `k` can pass the first `k`.
pub const TESTS_PER_TASK: usize = REWRITES_NEEDED;

/// Opening of intermediate stage `k` (index `k - 1`), with `{e}` the entry
/// point and `{a}` its arguments. Each one identifies its stage to both scripts.
const MARKERS: [&str; REWRITES_NEEDED - 1] = [
    "Write a Python function where {e} receives {a}",
    "Implement {e} taking {a}",
    "Define {e} with parameters {a}",
    "Create {e} accepting {a}",
    "Provide {e} over inputs {a}",
    "Build {e} from arguments {a}",
    "Code up {e} that consumes {a}",
];

/// Closing of intermediate stage `k`, with `{p}` the topic phrase.
const TAILS: [&str; REWRITES_NEEDED - 1] = [
    " and returns the answer; make sure to {p}.",
    " so that it can {p}. Return the result.",
    "; the function should {p} and hand back the value.",
    ": it needs to {p}, returning the outcome.",
    ", which must {p}; give back the computed result.",
    " in order to {p}, then return it.",
    " and have it {p} before returning.",
];

/// Prompt after `k` successful rewrites, `0 <= k <= REWRITES_NEEDED`.
fn stage_prompt(t: &Topic, k: usize) -> String {
    let (e, a, p) = (t.entry, t.args, t.phrase);
    match k {
        0 => format!(
            "Write a function to {p}. The signature should be typed and the return value made explicit in the answer, and the code must be valid Python without any extra output."
        ),
        REWRITES_NEEDED => {
            format!("Write a Python function with an {KEY_PHRASE}: def {e}({a}). It must {p} and return the result.")
        }
        _ => stage_marker(t, k) + &TAILS[k - 1].replace("{p}", p),
    }
}

fn stage_marker(t: &Topic, k: usize) -> String {
    MARKERS[k - 1].replace("{e}", t.entry).replace("{a}", t.args)
}

fn partial(k: usize) -> String {
    format!("# outcome: partial{k}")
}

fn code(outcome: &str) -> String {
    format!("```python\ndef solution(*args):\n    return None  {outcome}\n```")
}

pub fn tasks() -> Vec<Task> {
    TOPICS
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut tests: Vec<String> = t.tests.iter().map(|s| format!("assert {s}")).collect();
            let e = t.entry;
            tests.push(format!("assert callable({e})"));
            tests.push(format!("assert {e}.__name__ == '{e}'"));
            tests.push(format!("assert {e}.__doc__ is None or isinstance({e}.__doc__, str)"));
            tests.push(format!("assert {e}.__qualname__ == '{e}'"));
            tests.push(format!("assert not isinstance({e}, type)"));
            Task::new(format!("syn-{i:02}"), stage_prompt(t, 0), tests).with_entry_point(t.entry)
        })
        .collect()
}

pub fn corpus() -> Result<Corpus, CorpusError> {
    Corpus::new("synthetic", tasks())
}

/// Code-generator script: first matching rule wins.
///
/// Staying on an intermediate stage always has negative expected shaped
/// reward, and each rewrite raises it. Scrambled prompts do worse than
/// stage 1 on average but now and then score like the last stage, so a GA
/// that keeps its best-scoring candidate usually returns one.
/// Outcome pool for intermediate stage `k`: twelve draws mixing `partial{k}`
/// and `none` so that expected shaped reward climbs linearly from about
/// -0.85 at stage 1 to about -0.08 at the last intermediate stage.
fn stage_pool(k: usize) -> Vec<String> {
    const SIZE: usize = 12;
    let last = (REWRITES_NEEDED - 1) as f64;
    let target = -0.85 + 0.77 * (k as f64 - 1.0) / (last - 1.0);
    let rho = k as f64 / TESTS_PER_TASK as f64;
    let hits = ((1.0 + target) / (1.0 + rho) * SIZE as f64).round() as usize;
    let mut out = vec![partial(k); hits.clamp(1, SIZE - 1)];
    out.resize(SIZE, OUTCOME_NONE.to_string());
    out
}

pub fn generator_rules() -> Vec<MockRule> {
    let role = Some(Role::CodeGenerator);
    let pool = |outcomes: &[String]| outcomes.iter().map(|o| code(o)).collect::<Vec<_>>();
    let mut rules = vec![MockRule::fixed(KEY_PHRASE, role, code(OUTCOME_FULL))];
    for k in (1..REWRITES_NEEDED).rev() {
        for t in &TOPICS {
            rules.push(MockRule::pool(
                stage_marker(t, k),
                role,
                pool(&stage_pool(k)),
            ));
        }
    }
    for t in &TOPICS {
        rules.push(MockRule::fixed(t.phrase, role, code(OUTCOME_NONE)));
    }
    let mut scrambled = vec![OUTCOME_NONE.to_string(); 8];
    scrambled.extend(vec![OUTCOME_SYNTAX.to_string(); 6]);
    scrambled.extend([partial(REWRITES_NEEDED - 1), partial(REWRITES_NEEDED - 1)]);
    rules.push(MockRule::pool("", role, pool(&scrambled)));
    rules
}

/// Rewriter script: each rewrite advances one stage. Unrecognized prompts
/// get a rewrite that omits the entry point, which the rewrite filter rejects.
pub fn rewriter_rules() -> Vec<MockRule> {
    let role = Some(Role::Rewriter);
    let mut rules = Vec::new();
    for k in (1..REWRITES_NEEDED).rev() {
        for t in &TOPICS {
            rules.push(MockRule::fixed(stage_marker(t, k), role, stage_prompt(t, k + 1)));
        }
    }
    for t in &TOPICS {
        rules.push(MockRule::fixed(t.phrase, role, stage_prompt(t, 1)));
    }
    rules.push(MockRule::fixed("", role, "Write a function that solves the task."));
    rules
}

pub fn sandbox_table() -> FakeTable {
    let rule = |m: String, outcome| FakeRule {
        code_contains: m,
        outcome,
    };
    let mut rules = vec![rule(OUTCOME_FULL.into(), FakeOutcome::AllPass)];
    for k in 1..REWRITES_NEEDED {
        rules.push(rule(partial(k), FakeOutcome::PassFirst { n: k }));
    }
    rules.push(rule(OUTCOME_SYNTAX.into(), FakeOutcome::SyntaxError));
    FakeTable {
        rules,
        default: FakeOutcome::NoPass,
    }
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializable") + "\n")
        .collect()
}

/// Contents of the fixture files, keyed by file name.
pub fn fixture_files() -> Vec<(&'static str, String)> {
    vec![
        ("corpus.jsonl", jsonl(&tasks())),
        ("generator.jsonl", jsonl(&generator_rules())),
        ("rewriter.jsonl", jsonl(&rewriter_rules())),
        (
            "sandbox_rules.json",
            serde_json::to_string_pretty(&sandbox_table()).expect("serializable") + "\n",
        ),
        ("hermetic.toml", shipped_config(RewardMode::Shaped)),
        ("hermetic_binary.toml", shipped_config(RewardMode::Binary)),
    ]
}

/// Run config that sits next to the fixtures and writes under `runs/`.
fn shipped_config(mode: RewardMode) -> String {
    let s = ExperimentSettings {
        reward_mode: mode,
        ..ExperimentSettings::default()
    };
    let out = match mode {
        RewardMode::Shaped => "runs/shaped",
        RewardMode::Binary => "runs/binary",
    };
    run_config_toml(Path::new("."), Path::new(out), &s)
}

pub fn write_fixtures(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in fixture_files() {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

/// Training knobs for the curriculum run config.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub master_seed: u64,
    pub episodes: u64,
    pub reward_mode: RewardMode,
    pub learning_rate: f64,
    pub workers: usize,
    /// Training step cap; evaluation always allows [`EVAL_MAX_STEPS`].
    pub max_steps: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            master_seed: 20_240_601,
            episodes: 400,
            reward_mode: RewardMode::Shaped,
            learning_rate: LEARNING_RATE,
            workers: 1,
            max_steps: MAX_STEPS,
        }
    }
}

pub const LEARNING_RATE: f64 = 1e-3;
pub const MAX_STEPS: usize = 10;
pub const EVAL_MAX_STEPS: usize = 10;

/// Run config over the fixtures in `fixtures`, writing under `output_dir`.
pub fn run_config_toml(fixtures: &Path, output_dir: &Path, s: &ExperimentSettings) -> String {
    let mode = match s.reward_mode {
        RewardMode::Shaped => "shaped",
        RewardMode::Binary => "binary",
    };
    let f = |name: &str| toml_str(&fixtures.join(name));
    format!(
        r#"master_seed = {seed}
episodes = {episodes}
output_dir = {out}
workers = {workers}
checkpoint_every = 100

[corpus]
path = {corpus}
train_n = 20
test_n = 20

[generator]
kind = "scripted_mock"
script_path = {generator}

[rewriter]
kind = "scripted_mock"
script_path = {rewriter}

[embedder]
kind = "fallback"
dim = 384

[executor]
kind = "in_process_fake"
rules_path = {rules}

[env]
max_steps = {max_steps}
eval_max_steps = {EVAL_MAX_STEPS}
reward_mode = "{mode}"

[ppo]
learning_rate = {lr:?}
update_every_episodes = 8
"#,
        seed = s.master_seed,
        episodes = s.episodes,
        out = toml_str(output_dir),
        workers = s.workers,
        corpus = f("corpus.jsonl"),
        generator = f("generator.jsonl"),
        rewriter = f("rewriter.jsonl"),
        rules = f("sandbox_rules.json"),
        lr = s.learning_rate,
        max_steps = s.max_steps,
    )
}

fn toml_str(p: &Path) -> String {
    toml::Value::String(p.display().to_string()).to_string()
}
