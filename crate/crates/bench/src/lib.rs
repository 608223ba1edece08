//! Benchmark fixtures shared by the criterion suites.
