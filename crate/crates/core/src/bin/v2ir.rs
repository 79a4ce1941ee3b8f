fn main() {
    std::process::exit(v2ir::evalcli::run_cli(std::env::args_os()));
}
