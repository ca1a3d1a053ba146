fn main() -> std::process::ExitCode {
    bridge_pinn::cli::main()
}
