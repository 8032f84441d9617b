use std::io;

use synchrone_rc::cli::{main_with, Io};

fn main() {
    let mut out = io::stdout().lock();
    let mut err = io::stderr().lock();
    let code = main_with(std::env::args_os(), &mut Io { out: &mut out, err: &mut err });
    std::process::exit(code);
}
