fn main() -> std::process::ExitCode {
    cloze_rank::cli::main()
}
