fn main() -> std::process::ExitCode {
    tangent_mor::cli::main()
}
