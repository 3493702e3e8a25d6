"""Under-canopy radiance field reconstruction and ground-only rendering."""

__all__: tuple[str, ...] = ("__version__",)

__version__: str = "1.0.0"
