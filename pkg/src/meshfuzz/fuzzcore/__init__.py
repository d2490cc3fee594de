"""Campaign orchestration: config, the fuzzing loop, crash triage, stats,
the experiment harness, and the command-line interface."""
