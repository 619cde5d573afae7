use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rpt_core::smiles::{parse_smiles, tokenize, write_canonical, write_randomized};
use rpt_core::subseed;

use crate::{CliError, RunConfig, SmilesTool};

/// Streams stdin to stdout, one SMILES per line. Parse failures emit
/// `ERROR <position> <reason>` on the corresponding output line and do not
/// abort the stream.
pub fn run(config: &RunConfig, tool: &SmilesTool) -> Result<(), CliError> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    process(config, tool, stdin.lock(), &mut out)
}

fn process<R: BufRead, W: Write>(
    config: &RunConfig,
    tool: &SmilesTool,
    input: R,
    out: &mut W,
) -> Result<(), CliError> {
    for (index, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CliError::user(format!("stdin: {e}")))?;
        let trimmed = line.trim();
        let rendered = match tool {
            SmilesTool::Canonicalize => parse_smiles(trimmed)
                .map(|g| write_canonical(&g))
                .unwrap_or_else(|e| format!("ERROR {} {}", e.position, e.kind)),
            SmilesTool::Randomize => parse_smiles(trimmed)
                .map(|g| {
                    let mut rng = ChaCha8Rng::seed_from_u64(subseed(
                        config.seed,
                        "smiles-randomize",
                        index as u64,
                    ));
                    write_randomized(&g, &mut rng)
                })
                .unwrap_or_else(|e| format!("ERROR {} {}", e.position, e.kind)),
            SmilesTool::Tokenize => tokenize(trimmed)
                .map(|t| {
                    t.ids
                        .iter()
                        .map(u16::to_string)
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .unwrap_or_else(|e| format!("ERROR {} {}", e.position, e.kind)),
        };
        writeln!(out, "{rendered}").map_err(|e| CliError::user(format!("stdout: {e}")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_tool(tool: SmilesTool, input: &str, seed: u64) -> String {
        let mut config = RunConfig::default();
        config.seed = seed;
        let mut out = Vec::new();
        process(&config, &tool, input.as_bytes(), &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn canonicalize_unifies_equivalent_inputs() {
        let out = run_tool(SmilesTool::Canonicalize, "OCC\nCCO\n", 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], lines[1]);
    }

    #[test]
    fn tokenize_emits_ascii_ids() {
        let out = run_tool(SmilesTool::Tokenize, "CCO\n", 0);
        assert_eq!(out, "67 67 79\n");
    }

    #[test]
    fn errors_keep_the_stream_alive() {
        let out = run_tool(SmilesTool::Canonicalize, "C(\nCC\n", 0);
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[0].starts_with("ERROR 2 "));
        assert_eq!(lines[1], "CC");
    }

    #[test]
    fn randomize_is_reproducible_per_seed() {
        let a = run_tool(SmilesTool::Randomize, "CC(=O)OC1CCCC1\n", 7);
        let b = run_tool(SmilesTool::Randomize, "CC(=O)OC1CCCC1\n", 7);
        assert_eq!(a, b);
    }
}
