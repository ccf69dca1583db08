"""
URL configuration for dynrec_project project.

The ``dynrec`` app exposes read-only JSON endpoints over registered
experiment runs; the admin lists the same runs.
"""
from django.contrib import admin
from django.urls import include, path
from django.views.generic import RedirectView

urlpatterns = [
    path('admin/', admin.site.urls),
    path('runs/', include('dynrec.urls')),
    path('', RedirectView.as_view(url='/runs/', permanent=False), name='home'),
]
