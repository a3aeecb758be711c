import typer

from app.core.config import Settings, load_settings


def get_settings(ctx: typer.Context) -> Settings:
    """Settings resolved by the root callback; defaults plus environment when a command runs on its own."""
    root = ctx.find_root()
    if isinstance(root.obj, Settings):
        return root.obj
    settings = load_settings()
    root.obj = settings
    return settings
