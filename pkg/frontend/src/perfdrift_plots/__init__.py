from .figures import FigureError, FigureSpec, render_rate_figure, render_stream_density

__all__ = ["FigureError", "FigureSpec", "render_rate_figure", "render_stream_density"]
__version__ = "0.1.0"
