from rich.console import Console

from . import __version__

console = Console(stderr=True)


def banner():
    console.print(
        r"""
[bold cyan]
░█▀▀░█▀▀░█▀▀
░▀▀█░▀▀█░█▀▀
░▀▀▀░▀▀▀░▀░░
[/bold cyan]
"""
    )

    console.print(f"[bright_white]spatial-ssf v{__version__}[/bright_white]")
    console.print(
        "[dim]spatially consistent, reciprocal, multi-frequency small-scale fading[/dim]"
    )
    console.print()
