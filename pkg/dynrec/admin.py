from django.contrib import admin

from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'scenario', 'config_hash', 'status', 'started_at', 'finished_at')
    list_filter = ('scenario', 'status')
    search_fields = ('config_hash', 'output_dir')
    readonly_fields = ('config', 'summary', 'started_at', 'finished_at')
