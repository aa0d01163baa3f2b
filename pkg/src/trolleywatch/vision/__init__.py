"""Detection pipeline: frames in, labeled boxes and trolley counts out.

Submodules are imported explicitly by callers; nothing heavy happens at
package import time.
"""
