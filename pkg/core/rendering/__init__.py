"""
PNG renderers for inspection output: frame strips, reconstruction strips
and training curves.
"""

# Lazy imports so that core.eval is only loaded when curves are drawn
def __getattr__(name):
    if name in ('render_rows', 'render_frame_strip', 'render_reconstruction_strip'):
        from . import strip_png
        return getattr(strip_png, name)
    elif name in ('render_curves', 'mean_curves'):
        from . import curves_png
        return getattr(curves_png, name)
    raise AttributeError(f"module '{__name__}' has no attribute '{name}'")


__all__ = [
    # Frame strips
    'render_rows', 'render_frame_strip', 'render_reconstruction_strip',
    # Curves
    'render_curves', 'mean_curves',
]
