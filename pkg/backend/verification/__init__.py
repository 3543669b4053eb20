"""Property suites run by the `verify` command."""
