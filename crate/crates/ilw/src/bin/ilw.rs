fn main() {
    let (text, code) = ilw::cli::run_command(std::env::args_os());
    print!("{text}");
    std::process::exit(code);
}
